#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lrknn/channel_model.hpp"
#include "lrknn/likelihood.hpp"

namespace lrknn {

// A point of the search space: shaping parameters plus the kNN neighbour count.
struct Candidate {
  double r = 0.0;
  double sigma_z2 = 0.0;
  int k = 15;

  ShapingParams params() const { return {r, sigma_z2}; }
  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct Bounds {
  double r_lo = 0.0;
  double r_hi = 30.0;
  double sigma_lo = 1e-3;
  double sigma_hi = 2.0;
  int k_lo = 2;
  int k_hi = 64;

  void validate() const;
  bool contains(const Candidate& c) const;
  Candidate clamp(const Candidate& c) const;
};

enum class FitMethod { GA, GD };

// How gradient ascent chooses k.
enum class KPolicy {
  Fixed,   // the start candidate's k
  Sweep,   // KS-optimal k of a synthetic set at the start parameters
  Search,  // re-pick k within +-search_radius at every iteration
};

struct GaConfig {
  std::size_t population = 100;
  std::size_t generations = 50;
  std::size_t tournament_size = 4;
  double crossover_rate = 0.8;
  // Per-gene probability of a Gaussian kick.
  double mutation_rate = 0.1;
  // Kick standard deviation as a fraction of the box width; decays linearly
  // to zero over the generations.
  double mutation_scale = 0.1;
  std::size_t elite = 2;
  // After the last generation the rescore_top best distinct candidates are
  // scored again under rescore_seeds fresh seeds each and the best mean wins.
  // Zero in either turns this off and the single best value wins.
  std::size_t rescore_top = 10;
  std::size_t rescore_seeds = 5;
};

struct GdConfig {
  // Initial step per coordinate along axes where no Newton step is
  // available. Where the probes show a concave quadratic the step is the
  // Newton step from the finite-difference Hessian instead.
  double step_r = 0.5;
  double step_sigma = 0.05;
  // Central-difference offsets. An offset doubles, up to max_step_fraction
  // nominal steps, while its difference stays within `significance` noise
  // standard deviations, and relaxes back once the signal returns. The noise
  // is measured by rescoring the same point under fresh seeds; a
  // deterministic objective measures zero and never widens.
  double eps_r = 0.05;
  double eps_sigma = 0.005;
  double significance = 2.0;
  // Failed line searches tolerated on a noisy objective before stopping.
  std::size_t patience = 2;
  std::size_t max_iters = 30;
  // Backtracking halves the step from 1 until it improves on the current
  // value; iteration stops when no fraction down to the minimum does. No
  // component moves further than max_step_fraction nominal steps.
  double min_step_fraction = 1.0 / 64.0;
  double max_step_fraction = 4.0;
  KPolicy k_policy = KPolicy::Sweep;
  int search_radius = 2;
  // Reuse one synthetic-draw seed for every probe of an iteration.
  bool common_random_numbers = true;
  // Runs per k in the Sweep policy.
  std::size_t sweep_runs = 3;
};

struct FitConfig {
  FitMethod method = FitMethod::GA;
  Bounds bounds;
  GaConfig ga;
  GdConfig gd;
  // L, k, n_llf and the master seed of the objective.
  LlfConfig llf;
  int threads = 1;
  // Starting point for GD and the seeded GA individual; defaults to
  // initial_estimates() with k = llf.k.
  std::optional<Candidate> start;

  void validate() const;
};

struct TraceEntry {
  std::size_t index = 0;
  Candidate candidate;
  double objective = 0.0;
  // Seed the objective was evaluated with.
  std::uint64_t seed = 0;
};

struct FitResult {
  ShapingParams params;
  int k = 0;
  double objective = 0.0;
  std::uint64_t seed = 0;
  std::vector<TraceEntry> trace;
  std::size_t evaluations = 0;
  double wall_time = 0.0;
};

// Objective to maximise. The seed selects the synthetic draws, so a fixed
// (candidate, seed) pair always returns the same value. -inf marks a
// candidate that cannot be scored.
using Objective = std::function<double(const Candidate&, std::uint64_t)>;

// Moment starting point. sigma_z2 = -(2/K) sum ln I. r solves
//   2 [ln(r/(1+r)) + E1(r)] + ln((r^2+4r+2)/(1+r)^2) = ln m2 + 2 mean(ln I),
// the combination of E[ln I] and E[I^2] in which sigma_z2 cancels.
// Both are clamped into `bounds`.
ShapingParams initial_estimates(const SampleSet& observed, const Bounds& bounds = {});

// llf_mean of `observed` with cfg.k and cfg.seed replaced by the candidate's
// k and the given seed.
Objective llf_objective(const SampleSet& observed, const LlfConfig& cfg);

// Maximises `objective` within cfg.bounds from `start` using cfg.method.
// Throws FitFailure when every probe returns -inf.
FitResult maximize(const Objective& objective, const FitConfig& cfg, const Candidate& start);

// Estimates (r, sigma_z2, k) of `observed` by maximising the averaged
// approximate log-likelihood.
FitResult fit(const SampleSet& observed, const FitConfig& cfg);

// `eval_index,r,sigma_z2,k,llf` rows.
void write_trace_csv(std::ostream& out, const FitResult& result,
                     const std::string& provenance = {});

// key=value lines: r, sigma_z2, k, llf, evaluations, seconds.
void write_result_text(std::ostream& out, const FitResult& result);

}  // namespace lrknn
