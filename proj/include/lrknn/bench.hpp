#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "lrknn/channel_model.hpp"
#include "lrknn/optimize.hpp"

namespace lrknn {

struct ParamStats {
  double mse = 0.0;
  double variance = 0.0;
  double bias = 0.0;
};

// Mean squared error of `estimates` about `truth`, with the population
// variance and the bias of the mean. mse is computed directly, so
// variance + bias^2 == mse is a check rather than a definition.
ParamStats mse(std::span<const double> estimates, double truth);

struct TrialRecord {
  std::size_t trial = 0;
  bool ok = false;
  double r_hat = 0.0;
  double sigma_z2_hat = 0.0;
  int k_hat = 0;
  double llf = 0.0;
  double seconds = 0.0;
  std::string error;
};

struct MseReport {
  ShapingParams truth;
  std::size_t trials = 0;
  std::size_t failures = 0;
  ParamStats r;
  ParamStats sigma_z2;
  FitMethod method = FitMethod::GA;
  std::size_t M = 0;
  std::size_t L = 0;
  std::size_t n_llf = 0;
  double seconds_total = 0.0;
  std::vector<TrialRecord> rows;
};

struct CampaignOptions {
  int threads = 1;
  // Every trial reuses the seeds of trial 0.
  bool same_seed_all_trials = false;
  // Largest tolerated fraction of failed trials.
  double max_failure_fraction = 0.2;
  // Replaces lrknn::fit when set.
  std::function<FitResult(const SampleSet&, const FitConfig&)> fitter;
};

// `trials` independent fits at `truth`: trial t observes M samples drawn from
// a seed derived from (master_seed, t) and fits them with cfg (its llf seed
// also derived from t). Failed fits are excluded and counted; more than
// max_failure_fraction failures throws CampaignError.
MseReport campaign(const ShapingParams& truth, std::size_t M, const FitConfig& cfg,
                   std::size_t trials, std::uint64_t master_seed,
                   const CampaignOptions& options = {});

// `trial,r_hat,sigma_z2_hat,k_hat,llf,seconds`; failed trials carry nan.
void write_campaign_csv(std::ostream& out, const MseReport& report,
                        const std::string& provenance = {});

// One row per report.
void write_summary_csv(std::ostream& out, std::span<const MseReport> reports,
                       const std::string& provenance = {});

const char* method_name(FitMethod method);

}  // namespace lrknn
