#include "lrknn/bench.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "lrknn/error.hpp"
#include "lrknn/parallel.hpp"
#include "lrknn/seed.hpp"

namespace lrknn {

ParamStats mse(std::span<const double> estimates, double truth) {
  if (estimates.size() < 2) throw InvalidArgument("MSE needs at least two estimates");
  const auto n = static_cast<double>(estimates.size());
  double mean = 0.0;
  for (double v : estimates) mean += v;
  mean /= n;
  double var = 0.0;
  double sq = 0.0;
  for (double v : estimates) {
    var += (v - mean) * (v - mean);
    sq += (v - truth) * (v - truth);
  }
  return {sq / n, var / n, mean - truth};
}

const char* method_name(FitMethod method) { return method == FitMethod::GA ? "ga" : "gd"; }

MseReport campaign(const ShapingParams& truth, std::size_t M, const FitConfig& cfg,
                   std::size_t trials, std::uint64_t master_seed,
                   const CampaignOptions& options) {
  truth.validate();
  cfg.validate();
  if (trials < 2) throw InvalidArgument("campaign needs at least two trials");
  if (M < 2) throw InvalidArgument("campaign needs M >= 2");
  const auto t0 = std::chrono::steady_clock::now();

  MseReport report;
  report.truth = truth;
  report.trials = trials;
  report.method = cfg.method;
  report.M = M;
  report.L = cfg.llf.L;
  report.n_llf = cfg.llf.n_llf;
  report.rows.resize(trials);

  parallel_for(trials, options.threads, [&](std::size_t trial) {
    const std::size_t slot = options.same_seed_all_trials ? 0 : trial;
    TrialRecord& row = report.rows[trial];
    row.trial = trial;
    try {
      const SampleSet observed =
          sample(truth, M, derive_seed(master_seed, streams::kTrialObserved, slot));
      FitConfig local = cfg;
      local.threads = 1;
      local.llf.seed = derive_seed(master_seed, streams::kTrialFit, slot);
      const FitResult fitted = options.fitter ? options.fitter(observed, local) : fit(observed, local);
      row.ok = true;
      row.r_hat = fitted.params.r;
      row.sigma_z2_hat = fitted.params.sigma_z2;
      row.k_hat = fitted.k;
      row.llf = fitted.objective;
      row.seconds = fitted.wall_time;
    } catch (const Error& e) {
      row.ok = false;
      row.error = e.what();
    }
  });

  std::vector<double> r_hat;
  std::vector<double> s_hat;
  for (const auto& row : report.rows) {
    if (!row.ok) {
      ++report.failures;
      continue;
    }
    r_hat.push_back(row.r_hat);
    s_hat.push_back(row.sigma_z2_hat);
  }
  if (static_cast<double>(report.failures) > options.max_failure_fraction * trials ||
      r_hat.size() < 2) {
    std::ostringstream msg;
    msg << report.failures << " of " << trials << " trials failed";
    for (const auto& row : report.rows) {
      if (!row.ok) {
        msg << "; first failure: " << row.error;
        break;
      }
    }
    throw CampaignError(msg.str());
  }
  report.r = mse(r_hat, truth.r);
  report.sigma_z2 = mse(s_hat, truth.sigma_z2);
  report.seconds_total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_campaign_csv(std::ostream& out, const MseReport& report,
                        const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "trial,r_hat,sigma_z2_hat,k_hat,llf,seconds\n";
  const auto old_precision = out.precision(17);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& row : report.rows) {
    out << row.trial << ',' << (row.ok ? row.r_hat : nan) << ','
        << (row.ok ? row.sigma_z2_hat : nan) << ',' << row.k_hat << ','
        << (row.ok ? row.llf : nan) << ',' << row.seconds << '\n';
  }
  out.precision(old_precision);
}

void write_summary_csv(std::ostream& out, std::span<const MseReport> reports,
                       const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "r,sigma_z2,method,M,L,n_llf,trials,failures,mse_r,var_r,bias_r,"
         "mse_sigma_z2,var_sigma_z2,bias_sigma_z2,seconds\n";
  const auto old_precision = out.precision(17);
  for (const auto& rep : reports) {
    out << rep.truth.r << ',' << rep.truth.sigma_z2 << ',' << method_name(rep.method) << ','
        << rep.M << ',' << rep.L << ',' << rep.n_llf << ',' << rep.trials << ',' << rep.failures
        << ',' << rep.r.mse << ',' << rep.r.variance << ',' << rep.r.bias << ','
        << rep.sigma_z2.mse << ',' << rep.sigma_z2.variance << ',' << rep.sigma_z2.bias << ','
        << rep.seconds_total << '\n';
  }
  out.precision(old_precision);
}

}  // namespace lrknn
