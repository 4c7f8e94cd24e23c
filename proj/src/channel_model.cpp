#include "lrknn/channel_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/random/normal_distribution.hpp>

#include "lrknn/bessel.hpp"
#include "lrknn/error.hpp"

namespace lrknn {

void ShapingParams::validate() const {
  if (!std::isfinite(r) || !std::isfinite(sigma_z2)) {
    throw InvalidParameter("shaping parameters must be finite");
  }
  if (r < 0.0) throw InvalidParameter("r must be >= 0, got " + std::to_string(r));
  if (sigma_z2 <= 0.0) {
    throw InvalidParameter("sigma_z2 must be > 0, got " + std::to_string(sigma_z2));
  }
}

SampleSet::SampleSet(std::vector<double> values, std::optional<std::uint64_t> seed,
                     std::optional<ShapingParams> origin)
    : values_(std::move(values)), seed_(seed), origin_(origin) {
  if (values_.empty()) throw InvalidArgument("sample set is empty");
  for (double v : values_) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw InvalidArgument("intensity samples must be positive and finite");
    }
  }
}

bool SampleSet::is_sorted() const noexcept {
  return std::is_sorted(values_.begin(), values_.end());
}

SampleSet SampleSet::sorted() const {
  SampleSet copy = *this;
  std::sort(copy.values_.begin(), copy.values_.end());
  return copy;
}

void QuadratureConfig::validate() const {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw InvalidArgument("rel_tol must be in (0, 1)");
  if (!(z_range_sigmas >= 6.0)) throw InvalidArgument("z_range_sigmas must be >= 6");
  if (max_subdivisions < 1) throw InvalidArgument("max_subdivisions must be >= 1");
}

void sample_into(const ShapingParams& params, std::uint64_t seed, std::span<double> out) {
  params.validate();
  std::mt19937_64 engine(seed);
  // boost's ziggurat normal gives the same stream on every standard library.
  boost::random::normal_distribution<double> normal;
  const double sigma = std::sqrt(params.sigma_z2);
  const double log_mean = -0.5 * params.sigma_z2;
  const double mu = std::sqrt(params.r / (1.0 + params.r));
  const double g_scale = std::sqrt(0.5 / (1.0 + params.r));
  for (double& value : out) {
    const double re = mu + g_scale * normal(engine);
    const double im = g_scale * normal(engine);
    const double z = std::exp(log_mean + sigma * normal(engine));
    value = z * (re * re + im * im);
  }
}

SampleSet sample(const ShapingParams& params, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw InvalidArgument("sample count must be >= 1");
  std::vector<double> values(n);
  sample_into(params, seed, values);
  return SampleSet(std::move(values), seed, params);
}

double second_moment(const ShapingParams& params) {
  params.validate();
  const double r = params.r;
  return std::exp(params.sigma_z2) * (r * r + 4.0 * r + 2.0) / ((1.0 + r) * (1.0 + r));
}

namespace {

int depth_for(int max_subdivisions) {
  int depth = 0;
  while ((1 << depth) < max_subdivisions && depth < 30) ++depth;
  return depth;
}

// Subinterval error estimates are summed after the per-interval test, so the
// target handed to the integrator is half of the tolerance checked here.
template <typename F>
double integrate_ln_z(F&& integrand, const ShapingParams& params, const QuadratureConfig& cfg,
                      const char* what) {
  const double sigma = std::sqrt(params.sigma_z2);
  const double centre = -0.5 * params.sigma_z2;
  const double lo = centre - cfg.z_range_sigmas * sigma;
  const double hi = centre + cfg.z_range_sigmas * sigma;
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      integrand, lo, hi, static_cast<unsigned>(depth_for(cfg.max_subdivisions)),
      0.5 * cfg.rel_tol, &error, &l1);
  // Integrands that only reach the subnormal range carry no relative precision;
  // their integral is zero for every practical purpose.
  const bool negligible = l1 < 1e16 * std::numeric_limits<double>::min();
  if (!negligible && error > cfg.rel_tol * l1) {
    const double achieved = error / l1;
    std::ostringstream msg;
    msg << what << ": quadrature did not converge (achieved relative error " << achieved
        << ", requested " << cfg.rel_tol << ")";
    throw NumericError(msg.str(), achieved);
  }
  return value;
}

}  // namespace

double pdf_reference(const ShapingParams& params, double intensity, const QuadratureConfig& cfg) {
  params.validate();
  cfg.validate();
  if (!(intensity > 0.0) || !std::isfinite(intensity)) {
    throw InvalidArgument("intensity must be positive and finite");
  }
  const double r = params.r;
  const double s2 = params.sigma_z2;
  const double sqrt_r = std::sqrt(r);
  // With a = 2 sqrt((1+r) r I / z):
  //   e^{-r} I0(a) e^{-(1+r) I / z} = i0e(a) exp(-(sqrt((1+r) I / z) - sqrt(r))^2)
  // so nothing in the integrand can overflow.
  auto integrand = [&](double u) {
    const double scaled = (1.0 + r) * intensity * std::exp(-u);
    const double root = std::sqrt(scaled);
    const double a = 2.0 * sqrt_r * root;
    const double shift = u + 0.5 * s2;
    const double exponent = -(root - sqrt_r) * (root - sqrt_r) - shift * shift / (2.0 * s2) - u;
    return bessel_i0e(a) * std::exp(exponent);
  };
  const double integral = integrate_ln_z(integrand, params, cfg, "pdf_reference");
  const double density =
      (1.0 + r) / (std::sqrt(2.0 * std::numbers::pi * s2)) * integral;
  return std::max(density, 0.0);
}

double cdf_reference(const ShapingParams& params, double lambda, const QuadratureConfig& cfg) {
  params.validate();
  cfg.validate();
  if (std::isnan(lambda) || lambda <= 0.0) {
    throw InvalidArgument("lambda must be positive");
  }
  if (std::isinf(lambda)) return 1.0;
  const double r = params.r;
  const double s2 = params.sigma_z2;
  // 2 (1 + r) y is noncentral chi-square with 2 dof and noncentrality 2r.
  const boost::math::non_central_chi_squared_distribution<double> chi2(2.0, 2.0 * r);
  auto rician_cdf = [&](double t) {
    if (r == 0.0) return -std::expm1(-t);
    return boost::math::cdf(chi2, 2.0 * (1.0 + r) * t);
  };
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * s2);
  auto integrand = [&](double u) {
    const double shift = u + 0.5 * s2;
    return norm * std::exp(-shift * shift / (2.0 * s2)) * rician_cdf(lambda * std::exp(-u));
  };
  const double p = integrate_ln_z(integrand, params, cfg, "cdf_reference");
  return std::clamp(p, 0.0, 1.0);
}

ReferenceCdfTable::ReferenceCdfTable(const ShapingParams& params, std::size_t nodes,
                                     const QuadratureConfig& cfg)
    : params_(params) {
  params.validate();
  if (nodes < 2) throw InvalidArgument("table needs at least two nodes");
  // Lower end: far enough that F is negligible for any r (F ~ lambda near 0).
  log_lo_ = std::log(1e-9);
  // Upper end: grow until the survival probability is negligible.
  double hi = 4.0;
  while (cdf_reference(params, hi, cfg) < 1.0 - 1e-13 && hi < 1e6) hi *= 2.0;
  log_hi_ = std::log(hi);
  step_ = (log_hi_ - log_lo_) / static_cast<double>(nodes - 1);
  cdf_.resize(nodes);
  double running = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double value = cdf_reference(params, std::exp(log_lo_ + step_ * i), cfg);
    // Quadrature noise must not break monotonicity of the table.
    running = std::max(running, value);
    cdf_[i] = running;
  }
}

double ReferenceCdfTable::operator()(double lambda) const noexcept {
  if (!(lambda > 0.0)) return 0.0;
  const double pos = (std::log(lambda) - log_lo_) / step_;
  if (pos <= 0.0) return cdf_.front() * std::max(lambda / std::exp(log_lo_), 0.0);
  const auto last = static_cast<double>(cdf_.size() - 1);
  if (pos >= last) return cdf_.back();
  const auto j = static_cast<std::size_t>(pos);
  const double t = pos - static_cast<double>(j);
  return cdf_[j] + t * (cdf_[j + 1] - cdf_[j]);
}

void write_samples_csv(std::ostream& out, const SampleSet& samples,
                       const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "intensity\n";
  const auto old_precision = out.precision(17);
  for (double v : samples.values()) out << v << '\n';
  out.precision(old_precision);
}

}  // namespace lrknn
