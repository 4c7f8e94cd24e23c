#include "lrknn/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <boost/sort/spreadsort/spreadsort.hpp>

#include "lrknn/error.hpp"
#include "lrknn/knn_density.hpp"
#include "lrknn/parallel.hpp"
#include "lrknn/seed.hpp"

namespace lrknn {

void LlfConfig::validate() const {
  if (k < 1) throw InvalidArgument("k must be >= 1");
  if (L < static_cast<std::size_t>(k) + 1) throw InvalidArgument("L must be >= k + 1");
  if (n_llf < 1) throw InvalidArgument("n_llf must be >= 1");
}

std::uint64_t llf_run_seed(std::uint64_t master, std::size_t run) {
  return derive_seed(master, streams::kLlfRun, run);
}

namespace {

LlfValue llf_sorted(std::span<const double> observed, const ShapingParams& candidate,
                    const LlfConfig& cfg, std::uint64_t draw_seed) {
  std::vector<double> synthetic(cfg.L);
  sample_into(candidate, draw_seed, synthetic);
  boost::sort::spreadsort::spreadsort(synthetic.begin(), synthetic.end());
  const DensityEstimate est = estimate_sorted(std::move(synthetic), cfg.k);
  const auto support = est.support();
  const auto dens = est.densities();

  const auto first = std::lower_bound(observed.begin(), observed.end(), support.front());
  const auto last = std::upper_bound(first, observed.end(), support.back());
  LlfValue out;
  out.total = observed.size();
  out.retained = static_cast<std::size_t>(last - first);
  if (out.retained == 0) {
    throw EmptyOverlap("no observed sample lies inside the synthetic support");
  }

  // Both sequences are ascending, so the bracket only moves forward.
  double log_sum = 0.0;
  std::size_t j = 0;
  const std::size_t top = support.size() - 1;
  for (auto it = first; it != last; ++it) {
    const double x = *it;
    while (j + 1 < top && support[j + 1] <= x) ++j;
    double p;
    if (x >= support[top]) {
      p = dens[top];
    } else {
      const double t = (x - support[j]) / (support[j + 1] - support[j]);
      p = dens[j] + t * (dens[j + 1] - dens[j]);
    }
    log_sum += std::log(p);
  }
  const double mean_log_raw = log_sum / static_cast<double>(out.retained);
  out.value = cfg.literal_plus_c ? mean_log_raw + est.c() : mean_log_raw + std::log(est.c());
  return out;
}

std::span<const double> ascending(const SampleSet& observed, std::vector<double>& scratch) {
  if (observed.is_sorted()) return observed.values();
  scratch.assign(observed.values().begin(), observed.values().end());
  std::sort(scratch.begin(), scratch.end());
  return scratch;
}

}  // namespace

LlfValue llf_once(const SampleSet& observed, const ShapingParams& candidate,
                  const LlfConfig& cfg, std::uint64_t draw_seed) {
  candidate.validate();
  cfg.validate();
  std::vector<double> scratch;
  return llf_sorted(ascending(observed, scratch), candidate, cfg, draw_seed);
}

LlfValue llf_mean(const SampleSet& observed, const ShapingParams& candidate,
                  const LlfConfig& cfg) {
  candidate.validate();
  cfg.validate();
  std::vector<double> scratch;
  const auto sorted = ascending(observed, scratch);
  LlfValue out;
  out.total = observed.size();
  out.retained = observed.size();
  double sum = 0.0;
  for (std::size_t run = 0; run < cfg.n_llf; ++run) {
    try {
      const LlfValue once = llf_sorted(sorted, candidate, cfg, llf_run_seed(cfg.seed, run));
      sum += once.value;
      out.retained = std::min(out.retained, once.retained);
    } catch (const EmptyOverlap&) {
      out.value = -std::numeric_limits<double>::infinity();
      out.retained = 0;
      return out;
    }
  }
  out.value = sum / static_cast<double>(cfg.n_llf);
  return out;
}

std::vector<LlfGridCell> llf_grid(const SampleSet& observed, std::span<const double> r_values,
                                  std::span<const double> sigma_values, const LlfConfig& cfg,
                                  int threads) {
  cfg.validate();
  if (r_values.empty() || sigma_values.empty()) throw InvalidArgument("grid axes are empty");
  const SampleSet sorted = observed.is_sorted() ? observed : observed.sorted();
  std::vector<LlfGridCell> grid(r_values.size() * sigma_values.size());
  parallel_for(grid.size(), threads, [&](std::size_t cell) {
    const double r = r_values[cell / sigma_values.size()];
    const double s2 = sigma_values[cell % sigma_values.size()];
    LlfConfig local = cfg;
    local.seed = derive_seed(cfg.seed, streams::kGridCell, cell);
    grid[cell] = {r, s2, cfg.k, llf_mean(sorted, ShapingParams{r, s2}, local).value};
  });
  return grid;
}

const LlfGridCell& grid_argmax(std::span<const LlfGridCell> grid) {
  if (grid.empty()) throw InvalidArgument("grid is empty");
  const LlfGridCell* best = &grid.front();
  for (const auto& cell : grid) {
    if (cell.llf > best->llf) best = &cell;
  }
  return *best;
}

std::vector<double> grid_axis(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi >= lo)) throw InvalidArgument("grid axis needs lo <= hi, step > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 0.5)) + 1;
  std::vector<double> axis(count);
  for (std::size_t i = 0; i < count; ++i) axis[i] = lo + step * static_cast<double>(i);
  return axis;
}

void write_grid_csv(std::ostream& out, std::span<const LlfGridCell> grid,
                    const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "r,sigma_z2,k,llf\n";
  const auto old_precision = out.precision(17);
  for (const auto& cell : grid) {
    out << cell.r << ',' << cell.sigma_z2 << ',' << cell.k << ',' << cell.llf << '\n';
  }
  out.precision(old_precision);
}

}  // namespace lrknn
