#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lrknn/channel_model.hpp"
#include "lrknn/error.hpp"
#include "lrknn/knn_density.hpp"

namespace lrknn {

struct KsResult {
  double statistic = 0.0;
  std::size_t n = 0;
  double alpha = 0.05;
  double critical = 0.0;
  bool pass = false;
};

struct KSweepRow {
  int k = 0;
  double mean_T = 0.0;
  std::size_t runs = 0;
};

struct KSweepResult {
  std::vector<KSweepRow> rows;
  int argmin_k = 0;
};

// Two-sided KS distance between a continuous CDF and the empirical CDF of
// `sorted` (ascending): max_i max(|F(x_i) - i/n|, |F(x_i) - (i-1)/n|).
template <typename Cdf>
double ks_statistic_sorted(std::span<const double> sorted, Cdf&& cdf) {
  const std::size_t n = sorted.size();
  if (n == 0) throw InvalidArgument("KS statistic needs at least one sample");
  const double inv_n = 1.0 / static_cast<double>(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = cdf(sorted[i]);
    const double above = static_cast<double>(i + 1) * inv_n - f;
    const double below = f - static_cast<double>(i) * inv_n;
    worst = std::max({worst, above, below});
  }
  return std::min(worst, 1.0);
}

// Any sample order; sorts a copy.
template <typename Cdf>
double ks_statistic(std::span<const double> samples, Cdf&& cdf) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return ks_statistic_sorted(std::span<const double>(sorted), cdf);
}

// KS distance between the estimate's CDF (zero below and one above its
// support) and the empirical CDF of `samples`.
double ks_statistic(const DensityEstimate& est, std::span<const double> samples);

// Asymptotic Kolmogorov critical value sqrt(-ln(alpha/2) / 2) / sqrt(n);
// 1.358 / sqrt(n) at alpha = 0.05.
double ks_critical(double alpha, std::size_t n);

KsResult ks_test(const DensityEstimate& est, std::span<const double> samples,
                 double alpha = 0.05);

// For each k in [k_lo, k_hi]: `runs` fresh sample sets of size M at `params`,
// each scored by the KS distance of its own kNN estimate. Every (k, run)
// cell draws from its own derived seed, so the table is reproducible for a
// fixed master seed and independent of `threads`.
KSweepResult k_sweep(const ShapingParams& params, std::size_t M, int k_lo, int k_hi,
                     std::size_t runs, std::uint64_t seed, int threads = 1);

// `k,mean_T,runs` rows followed by `# argmin_k=<k>`.
void write_sweep_csv(std::ostream& out, const KSweepResult& sweep,
                     const std::string& provenance = {});

}  // namespace lrknn
