#include "lrknn/goodness_of_fit.hpp"

#include <limits>
#include <ostream>

#include <boost/sort/spreadsort/spreadsort.hpp>

#include "lrknn/parallel.hpp"
#include "lrknn/seed.hpp"

namespace lrknn {

double ks_statistic(const DensityEstimate& est, std::span<const double> samples) {
  return ks_statistic(samples, [&](double x) { return est.cdf_at(x); });
}

double ks_critical(double alpha, std::size_t n) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must be in (0, 1)");
  if (n == 0) throw InvalidArgument("n must be >= 1");
  return std::sqrt(-0.5 * std::log(0.5 * alpha)) / std::sqrt(static_cast<double>(n));
}

KsResult ks_test(const DensityEstimate& est, std::span<const double> samples, double alpha) {
  KsResult result;
  result.statistic = ks_statistic(est, samples);
  result.n = samples.size();
  result.alpha = alpha;
  result.critical = ks_critical(alpha, samples.size());
  result.pass = result.statistic < result.critical;
  return result;
}

KSweepResult k_sweep(const ShapingParams& params, std::size_t M, int k_lo, int k_hi,
                     std::size_t runs, std::uint64_t seed, int threads) {
  params.validate();
  if (runs < 1) throw InvalidArgument("runs must be >= 1");
  if (M < 3) throw InvalidArgument("k sweep needs M >= 3");
  if (k_lo < 2 || k_hi < k_lo || static_cast<std::size_t>(k_hi) > M - 1) {
    throw InvalidArgument("k range must lie within [2, M-1]");
  }
  const auto ks = static_cast<std::size_t>(k_hi - k_lo + 1);
  std::vector<double> cells(ks * runs);
  parallel_for(cells.size(), threads, [&](std::size_t cell) {
    const int k = k_lo + static_cast<int>(cell / runs);
    const std::size_t run = cell % runs;
    const std::uint64_t cell_seed =
        derive_seed(seed, streams::kSweepCell, (static_cast<std::uint64_t>(k) << 32) | run);
    std::vector<double> values(M);
    sample_into(params, cell_seed, values);
    boost::sort::spreadsort::spreadsort(values.begin(), values.end());
    const DensityEstimate est = estimate_sorted(values, k);
    cells[cell] = ks_statistic_sorted(std::span<const double>(values),
                                      [&](double x) { return est.cdf_at(x); });
  });

  KSweepResult result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ks; ++i) {
    double sum = 0.0;
    for (std::size_t run = 0; run < runs; ++run) sum += cells[i * runs + run];
    const KSweepRow row{k_lo + static_cast<int>(i), sum / static_cast<double>(runs), runs};
    if (row.mean_T < best) {
      best = row.mean_T;
      result.argmin_k = row.k;
    }
    result.rows.push_back(row);
  }
  return result;
}

void write_sweep_csv(std::ostream& out, const KSweepResult& sweep, const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "k,mean_T,runs\n";
  const auto old_precision = out.precision(17);
  for (const auto& row : sweep.rows) out << row.k << ',' << row.mean_T << ',' << row.runs << '\n';
  out.precision(old_precision);
  out << "# argmin_k=" << sweep.argmin_k << '\n';
}

}  // namespace lrknn
