#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "lrknn/error.hpp"
#include "lrknn/goodness_of_fit.hpp"

using Catch::Approx;

namespace {

// Exact P(D_n < d) for the one-sample two-sided KS statistic, by the
// Marsaglia-Tsang-Wang matrix-power method. Suitable for n up to ~200.
double ks_exact_cdf(int n, double d) {
  const int k = static_cast<int>(n * d) + 1;
  const int m = 2 * k - 1;
  const double h = k - n * d;
  std::vector<double> H(m * m, 0.0);
  auto at = [&](std::vector<double>& M, int i, int j) -> double& { return M[i * m + j]; };
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) at(H, i, j) = (i - j + 1 >= 0) ? 1.0 : 0.0;
  }
  for (int i = 0; i < m; ++i) {
    at(H, i, 0) -= std::pow(h, i + 1);
    at(H, m - 1, i) -= std::pow(h, m - i);
  }
  if (2 * h - 1 > 0) at(H, m - 1, 0) += std::pow(2 * h - 1, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      for (int g = 1; g <= i - j + 1; ++g) at(H, i, j) /= g;
    }
  }
  auto multiply = [&](const std::vector<double>& A, const std::vector<double>& B) {
    std::vector<double> C(m * m, 0.0);
    for (int i = 0; i < m; ++i) {
      for (int l = 0; l < m; ++l) {
        const double a = A[i * m + l];
        for (int j = 0; j < m; ++j) C[i * m + j] += a * B[l * m + j];
      }
    }
    return C;
  };
  std::vector<double> Q(m * m, 0.0);
  for (int i = 0; i < m; ++i) at(Q, i, i) = 1.0;
  for (int p = 0; p < n; ++p) Q = multiply(Q, H);
  double s = at(Q, k - 1, k - 1);
  for (int i = 1; i <= n; ++i) s = s * i / n;
  return s;
}

double ks_exact_critical(int n, double alpha) {
  double lo = 0.1 / std::sqrt(n);
  double hi = 3.0 / std::sqrt(n);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (ks_exact_cdf(n, mid) < 1.0 - alpha ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("asymptotic KS critical values", "[goodness_of_fit]") {
  CHECK(std::abs(lrknn::ks_critical(0.05, 1000) - 0.0429) < 5e-4);
  CHECK(std::abs(lrknn::ks_critical(0.05, 10000) - 0.0136) < 5e-4);
  CHECK(lrknn::ks_critical(0.05, 100) == Approx(0.1358).margin(1e-4));
  CHECK_THROWS_AS(lrknn::ks_critical(0.0, 100), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::ks_critical(1.0, 100), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::ks_critical(0.05, 0), lrknn::InvalidArgument);
}

TEST_CASE("asymptotic critical value is a slightly conservative exact one",
          "[goodness_of_fit]") {
  const double exact = ks_exact_critical(100, 0.05);
  // Oracle sanity: the tabulated exact value at n = 100 is 0.13403.
  CHECK(exact == Approx(0.13403).margin(5e-5));
  const double asymptotic = lrknn::ks_critical(0.05, 100);
  CHECK(asymptotic > exact);
  CHECK(asymptotic - exact < 2e-3);
}

TEST_CASE("KS statistic edge cases", "[goodness_of_fit]") {
  const std::vector<double> one = {0.7};
  CHECK(lrknn::ks_statistic(std::span<const double>(one), [](double) { return 0.5; }) == 0.5);

  const std::vector<double> train = {1.0, 1.3, 1.9, 2.2, 2.8, 3.1};
  const auto est = lrknn::estimate(std::span<const double>(train), 2);
  const std::vector<double> above = {5.0, 6.0, 7.5};
  CHECK(lrknn::ks_statistic(est, above) == 1.0);
  const std::vector<double> below = {0.1, 0.2};
  CHECK(lrknn::ks_statistic(est, below) == 1.0);
  const std::vector<double> none;
  CHECK_THROWS_AS(lrknn::ks_statistic(est, none), lrknn::InvalidArgument);
}

TEST_CASE("KS statistic equals a dense brute-force supremum", "[goodness_of_fit][property]") {
  std::mt19937_64 rng(8);
  std::gamma_distribution<double> gamma(3.0, 0.4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> train(400), test(60);
    for (auto& x : train) x = gamma(rng);
    for (auto& x : test) x = gamma(rng);
    const auto est = lrknn::estimate(std::span<const double>(train), 8);
    const double t = lrknn::ks_statistic(est, test);

    std::vector<double> sorted(test);
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double brute = 0.0;
    // Grid dense enough near each jump: approach every sample point from
    // both sides, plus a uniform sweep.
    auto probe = [&](double x) {
      const auto below_or_at = std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin();
      brute = std::max(brute, std::abs(est.cdf_at(x) - static_cast<double>(below_or_at) / n));
    };
    for (double x : sorted) {
      probe(x);
      probe(x - 1e-9);
    }
    for (int g = 0; g <= 100000; ++g) probe(-0.5 + 6.0 * g / 100000.0);
    CHECK(t == Approx(brute).margin(1e-6));
  }
}

TEST_CASE("KS statistic ignores the sample order", "[goodness_of_fit][property]") {
  const auto s = lrknn::sample({4.0, 0.25}, 2000, 77);
  const auto est = lrknn::estimate(s, 8);
  std::vector<double> shuffled(s.values().begin(), s.values().end());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(lrknn::ks_statistic(est, shuffled) == lrknn::ks_statistic(est, s.values()));
  }
}

TEST_CASE("self-tested kNN fit passes KS at M = 1000, k = 8 for most seeds",
          "[goodness_of_fit]") {
  const double critical = lrknn::ks_critical(0.05, 1000);
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = lrknn::sample({5.0, 0.25}, 1000, 1000 + seed);
    const auto result = lrknn::ks_test(lrknn::estimate(s, 8), s.values());
    CHECK(result.critical == critical);
    CHECK(result.pass == (result.statistic < critical));
    passes += result.pass ? 1 : 0;
  }
  CHECK(passes >= 90);
}

TEST_CASE("k sweep is reproducible and independent of the thread count",
          "[goodness_of_fit]") {
  const lrknn::ShapingParams p{4.0, 0.25};
  const auto a = lrknn::k_sweep(p, 500, 2, 12, 6, 31, 1);
  const auto b = lrknn::k_sweep(p, 500, 2, 12, 6, 31, 3);
  REQUIRE(a.rows.size() == 11);
  CHECK(a.argmin_k == b.argmin_k);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].k == 2 + static_cast<int>(i));
    CHECK(a.rows[i].mean_T == b.rows[i].mean_T);
    CHECK(a.rows[i].runs == 6);
    CHECK(a.rows[i].mean_T >= 0.0);
    CHECK(a.rows[i].mean_T <= 1.0);
  }
  const auto best = std::min_element(a.rows.begin(), a.rows.end(), [](auto& x, auto& y) {
    return x.mean_T < y.mean_T;
  });
  CHECK(best->k == a.argmin_k);

  std::ostringstream out;
  lrknn::write_sweep_csv(out, a);
  CHECK(out.str().rfind("k,mean_T,runs\n", 0) == 0);
  CHECK(out.str().find("# argmin_k=" + std::to_string(a.argmin_k) + "\n") != std::string::npos);
}

TEST_CASE("k sweep validates its ranges", "[goodness_of_fit]") {
  const lrknn::ShapingParams p{4.0, 0.25};
  CHECK_THROWS_AS(lrknn::k_sweep(p, 100, 1, 10, 2, 0), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::k_sweep(p, 100, 2, 100, 2, 0), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::k_sweep(p, 100, 5, 4, 2, 0), lrknn::InvalidArgument);
  CHECK_THROWS_AS(lrknn::k_sweep(p, 100, 2, 10, 0, 0), lrknn::InvalidArgument);
}
