#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "lrknn/channel_model.hpp"
#include "lrknn/error.hpp"

using Catch::Approx;
using lrknn::ShapingParams;

namespace {

struct Moments {
  double m1 = 0.0, m2 = 0.0, m4 = 0.0;
};

Moments moments(std::span<const double> v) {
  Moments m;
  for (double x : v) {
    m.m1 += x;
    m.m2 += x * x;
    m.m4 += x * x * x * x;
  }
  const auto n = static_cast<double>(v.size());
  m.m1 /= n;
  m.m2 /= n;
  m.m4 /= n;
  return m;
}

// Independent Monte Carlo route: standard-library lognormal and Gaussians,
// Rician intensity built from its in-phase and quadrature components.
std::vector<double> oracle_draws(const ShapingParams& p, std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::lognormal_distribution<double> z(-0.5 * p.sigma_z2, std::sqrt(p.sigma_z2));
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 / (1.0 + p.r)));
  const double mu = std::sqrt(p.r / (1.0 + p.r));
  std::vector<double> out(n);
  for (auto& v : out) {
    const double re = mu + g(rng);
    const double im = g(rng);
    v = z(rng) * (re * re + im * im);
  }
  return out;
}

double integrate_pdf(const ShapingParams& p, double power, const lrknn::QuadratureConfig& cfg) {
  using boost::math::quadrature::gauss_kronrod;
  auto f = [&](double i) { return std::pow(i, power) * lrknn::pdf_reference(p, i, cfg); };
  double total = 0.0;
  const double cuts[] = {1e-12, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 40.0, 100.0, 400.0};
  for (std::size_t j = 0; j + 1 < std::size(cuts); ++j) {
    total += gauss_kronrod<double, 31>::integrate(f, cuts[j], cuts[j + 1], 15, 1e-13);
  }
  return total;
}

}  // namespace

TEST_CASE("shaping parameters are validated", "[channel_model]") {
  CHECK_NOTHROW(ShapingParams{0.0, 0.1}.validate());
  CHECK_THROWS_AS((ShapingParams{-0.1, 0.1}.validate()), lrknn::InvalidParameter);
  CHECK_THROWS_AS((ShapingParams{1.0, 0.0}.validate()), lrknn::InvalidParameter);
  CHECK_THROWS_AS((ShapingParams{NAN, 0.1}.validate()), lrknn::InvalidParameter);
  CHECK_THROWS_AS((ShapingParams{1.0, INFINITY}.validate()), lrknn::InvalidParameter);
  CHECK_THROWS_AS(lrknn::sample({INFINITY, 0.2}, 10, 1), lrknn::InvalidParameter);
  CHECK_THROWS_AS(lrknn::sample({1.0, 0.2}, 0, 1), lrknn::InvalidArgument);
}

TEST_CASE("sample sets reject non-positive values", "[channel_model]") {
  CHECK_THROWS_AS(lrknn::SampleSet({}), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::SampleSet({1.0, 0.0}), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::SampleSet({1.0, -2.0}), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::SampleSet({1.0, NAN}), lrknn::InvalidArgument);
  const lrknn::SampleSet s({3.0, 1.0, 2.0}, 9, ShapingParams{1.0, 0.1});
  CHECK_FALSE(s.is_sorted());
  const auto sorted = s.sorted();
  CHECK(sorted.is_sorted());
  CHECK(sorted.seed() == s.seed());
  CHECK(sorted.origin() == s.origin());
}

TEST_CASE("sampler is deterministic per seed and strictly positive", "[channel_model]") {
  const ShapingParams p{3.0, 0.4};
  const auto a = lrknn::sample(p, 5000, 42);
  const auto b = lrknn::sample(p, 5000, 42);
  const auto c = lrknn::sample(p, 5000, 43);
  REQUIRE(a.size() == 5000);
  CHECK(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
  CHECK_FALSE(std::equal(a.values().begin(), a.values().end(), c.values().begin()));
  for (double v : a.values()) CHECK(v > 0.0);
  CHECK(a.seed() == 42u);
  CHECK(a.origin() == p);
}

TEST_CASE("r = 0 with a vanishing lognormal gives unit exponential intensity",
          "[channel_model]") {
  const std::size_t n = 1'000'000;
  const auto s = lrknn::sample({0.0, 1e-12}, n, 7);
  const auto m = moments(s.values());
  const double var = m.m2 - m.m1 * m.m1;
  // Exp(1): mean 1, variance 1, variance of the sample variance ~ 8 / n.
  CHECK(std::abs(m.m1 - 1.0) < 3.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(8.0 / double(n)));
}

TEST_CASE("second moment formula agrees with an independent Monte Carlo oracle",
          "[channel_model]") {
  const ShapingParams p{5.0, 0.25};
  const std::size_t n = 1'000'000;
  const double formula = std::exp(0.25) * (1.0 + (1.0 + 2.0 * 5.0) / 36.0);
  CHECK(lrknn::second_moment(p) == Approx(formula).epsilon(1e-15));

  const auto oracle = oracle_draws(p, n, 2024);
  const auto om = moments(oracle);
  const double oracle_se = std::sqrt((om.m4 - om.m2 * om.m2) / double(n));
  CHECK(std::abs(om.m2 - formula) < 3.0 * oracle_se);

  const auto s = lrknn::sample(p, n, 11);
  const auto m = moments(s.values());
  const double mean_se = std::sqrt((m.m2 - m.m1 * m.m1) / double(n));
  const double m2_se = std::sqrt((m.m4 - m.m2 * m.m2) / double(n));
  CHECK(std::abs(m.m1 - 1.0) < 3.0 * mean_se);
  CHECK(std::abs(m.m2 - formula) < 3.0 * m2_se);
}

TEST_CASE("pdf_reference reduces to exp(-I) for r = 0 and a degenerate lognormal",
          "[channel_model]") {
  CHECK(lrknn::pdf_reference({0.0, 1e-6}, 1.0) == Approx(std::exp(-1.0)).margin(1e-4));
  CHECK(lrknn::pdf_reference({0.0, 1e-6}, 2.5) == Approx(std::exp(-2.5)).margin(1e-4));
}

TEST_CASE("pdf_reference integrates to one and reproduces the second moment",
          "[channel_model]") {
  lrknn::QuadratureConfig cfg;
  REQUIRE(cfg.rel_tol == 1e-10);
  const double mass = integrate_pdf({4.0, 0.25}, 0.0, cfg);
  CHECK(std::abs(mass - 1.0) < 10.0 * cfg.rel_tol);

  const ShapingParams p{5.0, 0.25};
  const double m2 = integrate_pdf(p, 2.0, cfg);
  CHECK(std::abs(m2 - lrknn::second_moment(p)) < 10.0 * cfg.rel_tol * lrknn::second_moment(p));
}

TEST_CASE("pdf_reference does not overflow for strong coherence", "[channel_model]") {
  // Bessel argument 2 sqrt((1+r) r I / z) is in the thousands here.
  for (double i : {0.5, 0.9, 1.0, 1.1, 1.5}) {
    const double f = lrknn::pdf_reference({2000.0, 0.05}, i);
    CHECK(std::isfinite(f));
    CHECK(f >= 0.0);
  }
  const double mass = integrate_pdf({2000.0, 0.05}, 0.0, {});
  CHECK(mass == Approx(1.0).epsilon(1e-8));
}

TEST_CASE("pdf_reference reports quadrature failure with the achieved tolerance",
          "[channel_model]") {
  lrknn::QuadratureConfig cfg;
  cfg.rel_tol = 1e-15;
  cfg.max_subdivisions = 1;
  try {
    (void)lrknn::pdf_reference({5.0, 0.5}, 0.3, cfg);
    FAIL("expected NumericError");
  } catch (const lrknn::NumericError& e) {
    CHECK(e.achieved_tolerance() > cfg.rel_tol);
  }
  CHECK_THROWS_AS(lrknn::pdf_reference({5.0, 0.5}, 0.0), lrknn::InvalidArgument);
  lrknn::QuadratureConfig narrow;
  narrow.z_range_sigmas = 5.0;
  CHECK_THROWS_AS(lrknn::pdf_reference({5.0, 0.5}, 1.0, narrow), lrknn::InvalidArgument);
}

TEST_CASE("cdf_reference is a monotone probability with the right limits", "[channel_model]") {
  const ShapingParams p{4.0, 0.25};
  lrknn::QuadratureConfig cfg;
  CHECK(lrknn::cdf_reference(p, 1e-9) < 1e-8);
  CHECK(std::abs(lrknn::cdf_reference(p, 1e6) - 1.0) < 10.0 * cfg.rel_tol);
  double previous = 0.0;
  for (double x = 0.01; x < 12.0; x *= 1.15) {
    const double f = lrknn::cdf_reference(p, x);
    CHECK(f >= previous);
    CHECK(f <= 1.0);
    previous = f;
  }
  CHECK_THROWS_AS(lrknn::cdf_reference(p, -1.0), lrknn::InvalidArgument);
}

TEST_CASE("cdf_reference agrees with the integrated pdf", "[channel_model]") {
  using boost::math::quadrature::gauss_kronrod;
  for (const ShapingParams p : {ShapingParams{4.0, 0.25}, ShapingParams{0.5, 0.8}}) {
    auto f = [&](double i) { return lrknn::pdf_reference(p, i); };
    double running = 0.0;
    double lo = 1e-12;
    for (double hi : {0.3, 0.8, 1.0, 1.7, 3.0}) {
      running += gauss_kronrod<double, 31>::integrate(f, lo, hi, 15, 1e-13);
      lo = hi;
      INFO("r = " << p.r << ", lambda = " << hi);
      CHECK(lrknn::cdf_reference(p, hi) == Approx(running).margin(1e-8));
    }
  }
}

TEST_CASE("tabulated reference CDF tracks cdf_reference", "[channel_model]") {
  const ShapingParams p{5.0, 0.6};
  const lrknn::ReferenceCdfTable table(p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-6.0, 2.5);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double x = std::exp(u(rng));
    worst = std::max(worst, std::abs(table(x) - lrknn::cdf_reference(p, x)));
  }
  CHECK(worst < 1e-5);
  CHECK(table(0.0) == 0.0);
  CHECK(table(1e9) == Approx(1.0).margin(1e-12));
}

TEST_CASE("sample CSV has one header and full precision rows", "[channel_model]") {
  const auto s = lrknn::sample({2.0, 0.3}, 25, 5);
  std::ostringstream out;
  lrknn::write_samples_csv(out, s, "simulate --seed 5");
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "# simulate --seed 5");
  std::getline(in, line);
  CHECK(line == "intensity");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::stod(line) == s[rows]);
    ++rows;
  }
  CHECK(rows == 25);
}
