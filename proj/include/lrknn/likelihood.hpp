#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lrknn/channel_model.hpp"

namespace lrknn {

struct LlfConfig {
  // Number of synthetic samples drawn per evaluation.
  std::size_t L = 100000;
  // Neighbour count of the synthetic kNN density.
  int k = 15;
  // Independent evaluations averaged by llf_mean.
  std::size_t n_llf = 1;
  std::uint64_t seed = 0;
  // Add c instead of ln c to the mean log density (reproduces the formula as
  // literally printed in the source algorithm). Off by default.
  bool literal_plus_c = false;

  void validate() const;
};

struct LlfValue {
  // Mean of ln(c * p_k) over retained samples; -inf when nothing overlaps.
  double value = 0.0;
  // Observed samples inside the synthetic support.
  std::size_t retained = 0;
  std::size_t total = 0;
};

// Seed of run `run` inside llf_mean for master seed `master`.
std::uint64_t llf_run_seed(std::uint64_t master, std::size_t run);

// One approximate log-likelihood of `observed` under `candidate`: draw cfg.L
// synthetic samples from `draw_seed`, build their kNN density with cfg.k, keep
// the observed samples within [T[0], T[L-1]] and average the log of the
// normalised interpolated density over them. Throws EmptyOverlap when no
// observed sample is retained.
LlfValue llf_once(const SampleSet& observed, const ShapingParams& candidate,
                  const LlfConfig& cfg, std::uint64_t draw_seed);

// Mean of cfg.n_llf llf_once values drawn from llf_run_seed(cfg.seed, i).
// Reports the smallest retained count; any empty overlap yields value -inf.
LlfValue llf_mean(const SampleSet& observed, const ShapingParams& candidate,
                  const LlfConfig& cfg);

struct LlfGridCell {
  double r = 0.0;
  double sigma_z2 = 0.0;
  int k = 0;
  double llf = 0.0;
};

// llf_mean over the Cartesian grid r_values x sigma_values, row-major in r.
// Each cell uses a fresh master seed derived from cfg.seed and its index.
std::vector<LlfGridCell> llf_grid(const SampleSet& observed, std::span<const double> r_values,
                                  std::span<const double> sigma_values, const LlfConfig& cfg,
                                  int threads = 1);

// Highest-llf cell; the first one wins ties.
const LlfGridCell& grid_argmax(std::span<const LlfGridCell> grid);

// Inclusive arithmetic grid lo, lo + step, ..., hi (rounded to the step).
std::vector<double> grid_axis(double lo, double hi, double step);

// `r,sigma_z2,k,llf` rows.
void write_grid_csv(std::ostream& out, std::span<const LlfGridCell> grid,
                    const std::string& provenance = {});

}  // namespace lrknn
