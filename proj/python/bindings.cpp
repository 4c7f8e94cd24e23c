#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <span>
#include <vector>

#include "lrknn/bench.hpp"
#include "lrknn/channel_model.hpp"
#include "lrknn/error.hpp"
#include "lrknn/goodness_of_fit.hpp"
#include "lrknn/knn_density.hpp"
#include "lrknn/likelihood.hpp"
#include "lrknn/optimize.hpp"

namespace py = pybind11;
using namespace lrknn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
  if (a.ndim() != 1) throw InvalidArgument("expected a one-dimensional array");
  return {a.data(), a.data() + a.size()};
}

py::array_t<double> to_array(std::span<const double> v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

SampleSet to_samples(const Array& a) { return SampleSet(to_vector(a)); }

}  // namespace

PYBIND11_MODULE(_lrknn, m) {
  m.doc() = "Lognormal-Rician shaping parameter estimation with kNN density estimates.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidParameter>(m, "InvalidParameter", base);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base);
  py::register_exception<NumericError>(m, "NumericError", base);
  py::register_exception<DegenerateSample>(m, "DegenerateSample", base);
  py::register_exception<EmptyOverlap>(m, "EmptyOverlap", base);
  py::register_exception<FitFailure>(m, "FitFailure", base);
  py::register_exception<CampaignError>(m, "CampaignError", base);

  py::class_<ShapingParams>(m, "ShapingParams")
      .def(py::init<double, double>(), py::arg("r"), py::arg("sigma_z2"))
      .def_readwrite("r", &ShapingParams::r)
      .def_readwrite("sigma_z2", &ShapingParams::sigma_z2)
      .def("validate", &ShapingParams::validate)
      .def("__repr__", [](const ShapingParams& p) {
        return "ShapingParams(r=" + std::to_string(p.r) +
               ", sigma_z2=" + std::to_string(p.sigma_z2) + ")";
      });

  m.def(
      "sample",
      [](const ShapingParams& p, std::size_t n, std::uint64_t seed) {
        std::vector<double> v(n);
        {
          py::gil_scoped_release release;
          p.validate();
          if (n == 0) throw InvalidArgument("n must be positive");
          sample_into(p, seed, v);
        }
        return to_array(v);
      },
      py::arg("params"), py::arg("n"), py::arg("seed"), "Draw n intensities I = z y.");
  m.def("second_moment", &second_moment, py::arg("params"));
  m.def(
      "pdf_reference",
      [](const ShapingParams& p, double i) { return pdf_reference(p, i); }, py::arg("params"),
      py::arg("intensity"));
  m.def(
      "cdf_reference",
      [](const ShapingParams& p, double lambda) { return cdf_reference(p, lambda); },
      py::arg("params"), py::arg("lam"));

  py::class_<DensityEstimate>(m, "DensityEstimate")
      .def_property_readonly("support", [](const DensityEstimate& e) { return to_array(e.support()); })
      .def_property_readonly("densities",
                             [](const DensityEstimate& e) { return to_array(e.densities()); })
      .def_property_readonly("c", &DensityEstimate::c)
      .def_property_readonly("k", &DensityEstimate::k)
      .def("__len__", &DensityEstimate::size)
      .def("density_at", &DensityEstimate::density_at, py::arg("x"), py::arg("normalized") = true)
      .def("cdf_at", &DensityEstimate::cdf_at, py::arg("lam"));

  m.def(
      "estimate",
      [](const Array& samples, int k) {
        auto v = to_vector(samples);
        py::gil_scoped_release release;
        return estimate(std::span<const double>(v), k);
      },
      py::arg("samples"), py::arg("k"), "kNN density estimate on the sorted samples.");

  m.def(
      "ks_statistic",
      [](const DensityEstimate& est, const Array& samples) {
        auto v = to_vector(samples);
        return ks_statistic(est, v);
      },
      py::arg("estimate"), py::arg("samples"));
  m.def("ks_critical", &ks_critical, py::arg("alpha"), py::arg("n"));
  m.def(
      "k_sweep",
      [](const ShapingParams& p, std::size_t M, int k_lo, int k_hi, std::size_t runs,
         std::uint64_t seed, int threads) {
        KSweepResult res;
        {
          py::gil_scoped_release release;
          res = k_sweep(p, M, k_lo, k_hi, runs, seed, threads);
        }
        py::list rows;
        for (const auto& row : res.rows) rows.append(py::make_tuple(row.k, row.mean_T, row.runs));
        return py::make_tuple(rows, res.argmin_k);
      },
      py::arg("params"), py::arg("M"), py::arg("k_lo"), py::arg("k_hi"), py::arg("runs"),
      py::arg("seed"), py::arg("threads") = 1,
      "Returns ([(k, mean_T, runs), ...], argmin_k).");

  py::class_<LlfConfig>(m, "LlfConfig")
      .def(py::init([](std::size_t L, int k, std::size_t n_llf, std::uint64_t seed) {
             return LlfConfig{L, k, n_llf, seed, false};
           }),
           py::arg("L") = 100000, py::arg("k") = 15, py::arg("n_llf") = 1, py::arg("seed") = 0)
      .def_readwrite("L", &LlfConfig::L)
      .def_readwrite("k", &LlfConfig::k)
      .def_readwrite("n_llf", &LlfConfig::n_llf)
      .def_readwrite("seed", &LlfConfig::seed);

  m.def(
      "llf_mean",
      [](const Array& observed, const ShapingParams& p, const LlfConfig& cfg) {
        const auto s = to_samples(observed);
        LlfValue v;
        {
          py::gil_scoped_release release;
          v = llf_mean(s, p, cfg);
        }
        return py::make_tuple(v.value, v.retained, v.total);
      },
      py::arg("observed"), py::arg("candidate"), py::arg("cfg"),
      "Returns (llf, retained, total).");
  m.def(
      "llf_grid",
      [](const Array& observed, const Array& r_values, const Array& sigma_values,
         const LlfConfig& cfg, int threads) {
        const auto s = to_samples(observed);
        const auto rs = to_vector(r_values);
        const auto ss = to_vector(sigma_values);
        std::vector<LlfGridCell> grid;
        {
          py::gil_scoped_release release;
          grid = llf_grid(s, rs, ss, cfg, threads);
        }
        const std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(rs.size()),
                                             static_cast<py::ssize_t>(ss.size())};
        py::array_t<double> out(shape);
        auto w = out.mutable_unchecked<2>();
        for (std::size_t i = 0; i < rs.size(); ++i) {
          for (std::size_t j = 0; j < ss.size(); ++j) w(i, j) = grid[i * ss.size() + j].llf;
        }
        return out;
      },
      py::arg("observed"), py::arg("r_values"), py::arg("sigma_values"), py::arg("cfg"),
      py::arg("threads") = 1, "LLF surface indexed [r, sigma_z2].");

  m.def(
      "initial_estimates",
      [](const Array& observed) { return initial_estimates(to_samples(observed)); },
      py::arg("observed"));

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("k", &FitResult::k)
      .def_readonly("objective", &FitResult::objective)
      .def_readonly("seed", &FitResult::seed)
      .def_readonly("evaluations", &FitResult::evaluations)
      .def_readonly("wall_time", &FitResult::wall_time);

  m.def(
      "fit",
      [](const Array& observed, const std::string& method, std::size_t L, int k,
         std::size_t n_llf, std::uint64_t seed, std::size_t generations,
         std::size_t population, const std::string& k_policy, int threads) {
        const auto s = to_samples(observed);
        FitConfig cfg;
        if (method == "ga") {
          cfg.method = FitMethod::GA;
        } else if (method == "gd") {
          cfg.method = FitMethod::GD;
        } else {
          throw InvalidArgument("method must be 'ga' or 'gd'");
        }
        if (k_policy == "fixed") {
          cfg.gd.k_policy = KPolicy::Fixed;
        } else if (k_policy == "sweep") {
          cfg.gd.k_policy = KPolicy::Sweep;
        } else if (k_policy == "search") {
          cfg.gd.k_policy = KPolicy::Search;
        } else {
          throw InvalidArgument("k_policy must be 'fixed', 'sweep' or 'search'");
        }
        cfg.llf = {L, k, n_llf, seed, false};
        cfg.ga.generations = generations;
        cfg.ga.population = population;
        cfg.threads = threads;
        py::gil_scoped_release release;
        return fit(s, cfg);
      },
      py::arg("observed"), py::arg("method") = "ga", py::arg("L") = 100000, py::arg("k") = 15,
      py::arg("n_llf") = 1, py::arg("seed") = 0, py::arg("generations") = 50,
      py::arg("population") = 100, py::arg("k_policy") = "sweep", py::arg("threads") = 1);

  m.def(
      "mse",
      [](const Array& estimates, double truth) {
        const auto v = to_vector(estimates);
        const auto s = mse(v, truth);
        return py::make_tuple(s.mse, s.variance, s.bias);
      },
      py::arg("estimates"), py::arg("truth"), "Returns (mse, variance, bias).");
}
