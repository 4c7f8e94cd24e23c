#include <algorithm>
#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "lrknn/bench.hpp"
#include "lrknn/channel_model.hpp"
#include "lrknn/error.hpp"
#include "lrknn/goodness_of_fit.hpp"
#include "lrknn/knn_density.hpp"
#include "lrknn/likelihood.hpp"
#include "lrknn/optimize.hpp"

namespace {

// Raised for flag values that break a module precondition; maps to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  double r = 5.0;
  double sigma_z2 = 0.25;
  int k = 15;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> generated;
  std::optional<std::size_t> n_llf;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> runs;
  std::uint64_t seed = 1;
  std::string method = "ga";
  std::string out;
  std::string in;
  bool paper_scale = false;
  int threads = 0;

  // ks-sweep
  int k_min = 2;
  int k_max = 30;

  // llf-grid
  std::vector<double> r_range{4.0, 6.0, 0.1};
  std::vector<double> sigma_range{0.15, 0.35, 0.01};

  // fit
  std::string result;
  bool search_k = false;
  bool fixed_k = false;
  std::optional<std::size_t> generations;
  std::optional<std::size_t> population;

  // bench
  std::vector<double> r_values;
  std::vector<double> sigma_values;
  std::string campaign_prefix;
};

std::string invocation(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw UsageError(message);
}

std::ofstream open_out(const std::string& path) {
  require(!path.empty(), "--out is required");
  std::ofstream f(path);
  require(static_cast<bool>(f), "cannot write " + path);
  return f;
}

lrknn::ShapingParams truth(const Options& o) {
  const lrknn::ShapingParams p{o.r, o.sigma_z2};
  try {
    p.validate();
  } catch (const lrknn::Error& e) {
    throw UsageError(e.what());
  }
  return p;
}

int threads_of(const Options& o) {
  if (o.threads > 0) return o.threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::size_t samples_or(const Options& o, std::size_t desk, std::size_t paper) {
  return o.samples.value_or(o.paper_scale ? paper : desk);
}

lrknn::SampleSet read_samples(const std::string& path) {
  std::ifstream f(path);
  require(static_cast<bool>(f), "cannot read " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    const std::string field = line.substr(0, comma);
    try {
      std::size_t used = 0;
      const double v = std::stod(field, &used);
      values.push_back(v);
    } catch (const std::exception&) {
      // header row
    }
  }
  return lrknn::SampleSet(std::move(values));
}

// Observed set: from --in when given, otherwise drawn at (--r, --sigma-z2).
lrknn::SampleSet observed(const Options& o, std::size_t desk, std::size_t paper) {
  if (!o.in.empty()) return read_samples(o.in);
  const std::size_t m = samples_or(o, desk, paper);
  require(m >= 1, "--samples must be at least 1");
  return lrknn::sample(truth(o), m, o.seed);
}

lrknn::FitConfig fit_config(const Options& o) {
  lrknn::FitConfig cfg;
  require(o.method == "ga" || o.method == "gd", "--method must be ga or gd");
  cfg.method = o.method == "ga" ? lrknn::FitMethod::GA : lrknn::FitMethod::GD;
  cfg.llf.L = o.generated.value_or(o.paper_scale ? 1000000 : 100000);
  cfg.llf.k = o.k;
  cfg.llf.n_llf = o.n_llf.value_or(cfg.method == lrknn::FitMethod::GA ? 1 : 50);
  cfg.llf.seed = o.seed;
  if (o.generations) cfg.ga.generations = *o.generations;
  if (o.population) cfg.ga.population = *o.population;
  require(!(o.search_k && o.fixed_k), "--search-k and --fixed-k are exclusive");
  if (o.search_k) cfg.gd.k_policy = lrknn::KPolicy::Search;
  if (o.fixed_k) cfg.gd.k_policy = lrknn::KPolicy::Fixed;
  cfg.threads = threads_of(o);
  try {
    cfg.validate();
  } catch (const lrknn::Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int run_simulate(const Options& o, const std::string& prov) {
  const auto p = truth(o);
  const std::size_t m = samples_or(o, 10000, 1000000);
  require(m >= 1, "--samples must be at least 1");
  auto f = open_out(o.out);
  const auto s = lrknn::sample(p, m, o.seed);
  lrknn::write_samples_csv(f, s, prov);
  std::cout << "simulate: " << s.size() << " samples r=" << p.r << " sigma_z2=" << p.sigma_z2
            << " -> " << o.out << '\n';
  return 0;
}

int run_density(const Options& o, const std::string& prov) {
  if (o.in.empty()) truth(o);
  auto f = open_out(o.out);
  const auto s = observed(o, 10000, 1000000);
  require(s.size() >= 2, "density needs at least 2 samples");
  require(o.k >= 1 && static_cast<std::size_t>(o.k) < s.size(), "--k must lie in [1, M-1]");
  const auto est = lrknn::estimate(s, o.k);
  lrknn::write_density_csv(f, est, prov);
  std::cout << "density: M=" << est.size() << " k=" << est.k() << " c=" << est.c() << " -> "
            << o.out << '\n';
  return 0;
}

int run_ks_sweep(const Options& o, const std::string& prov) {
  const auto p = truth(o);
  const std::size_t m = samples_or(o, 1000, 10000);
  const std::size_t runs = o.runs.value_or(o.paper_scale ? 100 : 20);
  require(m >= 3, "--samples must be at least 3");
  require(runs >= 1, "--runs must be at least 1");
  const int k_hi = std::min<int>(o.k_max, static_cast<int>(m) - 1);
  require(o.k_min >= 2 && o.k_min <= k_hi, "k range must lie within [2, M-1]");
  auto f = open_out(o.out);
  const auto sweep = lrknn::k_sweep(p, m, o.k_min, k_hi, runs, o.seed, threads_of(o));
  lrknn::write_sweep_csv(f, sweep, prov);
  std::cout << "ks-sweep: M=" << m << " runs=" << runs << " argmin_k=" << sweep.argmin_k
            << " -> " << o.out << '\n';
  return 0;
}

std::vector<double> axis(const std::vector<double>& range, const char* flag) {
  require(range.size() == 3, std::string(flag) + " takes LO HI STEP");
  try {
    return lrknn::grid_axis(range[0], range[1], range[2]);
  } catch (const lrknn::Error& e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

int run_llf_grid(const Options& o, const std::string& prov) {
  if (o.in.empty()) truth(o);
  lrknn::LlfConfig cfg;
  cfg.L = o.generated.value_or(o.paper_scale ? 1000000 : 100000);
  cfg.k = o.k;
  cfg.n_llf = o.n_llf.value_or(1);
  cfg.seed = o.seed;
  try {
    cfg.validate();
  } catch (const lrknn::Error& e) {
    throw UsageError(e.what());
  }
  const auto rs = axis(o.r_range, "--r-range");
  const auto ss = axis(o.sigma_range, "--sigma-range");
  auto f = open_out(o.out);
  const auto obs = observed(o, 10000, 10000);
  const auto grid = lrknn::llf_grid(obs, rs, ss, cfg, threads_of(o));
  lrknn::write_grid_csv(f, grid, prov);
  const auto& best = lrknn::grid_argmax(grid);
  std::cout << "llf-grid: " << grid.size() << " cells argmax r=" << best.r
            << " sigma_z2=" << best.sigma_z2 << " llf=" << best.llf << " -> " << o.out << '\n';
  return 0;
}

int run_fit(const Options& o, const std::string& prov) {
  if (o.in.empty()) {
    truth(o);
    require(samples_or(o, 10000, 10000) >= 2, "fit needs --samples >= 2");
  }
  const auto cfg = fit_config(o);
  auto f = open_out(o.out);
  std::optional<std::ofstream> result_file;
  if (!o.result.empty()) {
    result_file.emplace(o.result);
    require(static_cast<bool>(*result_file), "cannot write " + o.result);
  }
  const auto obs = observed(o, 10000, 10000);
  require(obs.size() >= 2, "fit needs at least 2 observed samples");
  const auto res = lrknn::fit(obs, cfg);
  lrknn::write_trace_csv(f, res, prov);
  if (result_file) {
    *result_file << "# " << prov << '\n';
    lrknn::write_result_text(*result_file, res);
  }
  std::cout << "fit: method=" << lrknn::method_name(cfg.method) << " r=" << res.params.r
            << " sigma_z2=" << res.params.sigma_z2 << " k=" << res.k << " llf=" << res.objective
            << " evaluations=" << res.evaluations << " seconds=" << res.wall_time << '\n';
  return 0;
}

std::string number_tag(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

int run_bench(const Options& o, const std::string& prov) {
  const auto cfg = fit_config(o);
  const std::size_t m = samples_or(o, 10000, 10000);
  const std::size_t trials = o.trials.value_or(o.paper_scale ? 35 : 10);
  require(m >= 2, "bench needs --samples >= 2");
  require(trials >= 2, "--trials must be at least 2");
  std::vector<lrknn::ShapingParams> cells;
  const auto rs = o.r_values.empty() ? std::vector<double>{o.r} : o.r_values;
  const auto ss = o.sigma_values.empty() ? std::vector<double>{o.sigma_z2} : o.sigma_values;
  for (double r : rs) {
    for (double s : ss) {
      Options one = o;
      one.r = r;
      one.sigma_z2 = s;
      cells.push_back(truth(one));
    }
  }
  auto f = open_out(o.out);
  lrknn::CampaignOptions opts;
  opts.threads = cfg.threads;
  // Module-level concurrency sits in the trials; each fit runs serially.
  auto trial_cfg = cfg;
  trial_cfg.threads = 1;
  std::vector<lrknn::MseReport> reports;
  for (const auto& p : cells) {
    reports.push_back(lrknn::campaign(p, m, trial_cfg, trials, o.seed, opts));
    const auto& rep = reports.back();
    std::cout << "bench: r=" << p.r << " sigma_z2=" << p.sigma_z2 << " mse_r=" << rep.r.mse
              << " mse_sigma_z2=" << rep.sigma_z2.mse << " failures=" << rep.failures << '\n';
    if (!o.campaign_prefix.empty()) {
      const std::string path =
          o.campaign_prefix + "_r" + number_tag(p.r) + "_s" + number_tag(p.sigma_z2) + ".csv";
      std::ofstream c(path);
      if (!c) throw lrknn::Error("cannot write " + path);
      lrknn::write_campaign_csv(c, rep, prov);
    }
  }
  lrknn::write_summary_csv(f, reports, prov);
  std::cout << "bench: " << reports.size() << " cells x " << trials << " trials -> " << o.out
            << '\n';
  return 0;
}

void common(CLI::App* sub, Options& o) {
  sub->add_option("--r", o.r, "Rician coherence parameter r");
  sub->add_option("--sigma-z2", o.sigma_z2, "Log-amplitude variance sigma_z^2");
  sub->add_option("--seed", o.seed, "Master seed");
  sub->add_option("--out", o.out, "Output CSV path")->required();
  sub->add_flag("--paper-scale", o.paper_scale, "Full-size defaults");
  sub->add_option("--threads", o.threads, "Worker threads (0 = all cores)")
      ->check(CLI::NonNegativeNumber);
}

void observed_flags(CLI::App* sub, Options& o) {
  sub->add_option("--samples,-M", o.samples, "Observed samples M");
  sub->add_option("--in", o.in, "Read observed samples from a CSV instead of simulating")
      ->check(CLI::ExistingFile);
}

void llf_flags(CLI::App* sub, Options& o) {
  sub->add_option("--k", o.k, "kNN neighbour count");
  sub->add_option("--generated,-L", o.generated, "Generated samples L per LLF run");
  sub->add_option("--n-llf", o.n_llf, "LLF runs averaged per candidate");
}

void fit_flags(CLI::App* sub, Options& o) {
  llf_flags(sub, o);
  sub->add_option("--method", o.method, "Optimizer")->check(CLI::IsMember({"ga", "gd"}));
  sub->add_flag("--search-k", o.search_k, "GD: search k within +-2 of the current k");
  sub->add_flag("--fixed-k", o.fixed_k, "GD: hold --k instead of the KS-swept k");
  sub->add_option("--generations", o.generations, "GA generations");
  sub->add_option("--population", o.population, "GA population");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lognormal-Rician shaping parameter estimation with kNN densities"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Draw Lognormal-Rician samples");
  common(simulate, o);
  simulate->add_option("--samples,-M", o.samples, "Number of samples");

  auto* density = app.add_subcommand("density", "kNN density estimate of a sample set");
  common(density, o);
  observed_flags(density, o);
  density->add_option("--k", o.k, "kNN neighbour count");

  auto* sweep = app.add_subcommand("ks-sweep", "Mean KS statistic versus k");
  common(sweep, o);
  sweep->add_option("--samples,-M", o.samples, "Samples per run");
  sweep->add_option("--runs", o.runs, "Runs averaged per k");
  sweep->add_option("--k-min", o.k_min, "Smallest k");
  sweep->add_option("--k-max", o.k_max, "Largest k (clipped to M-1)");

  auto* grid = app.add_subcommand("llf-grid", "Averaged LLF over an (r, sigma_z2) grid");
  common(grid, o);
  observed_flags(grid, o);
  llf_flags(grid, o);
  grid->add_option("--r-range", o.r_range, "LO HI STEP")->expected(3);
  grid->add_option("--sigma-range", o.sigma_range, "LO HI STEP")->expected(3);

  auto* fit = app.add_subcommand("fit", "Estimate (r, sigma_z2, k) of an observed set");
  common(fit, o);
  observed_flags(fit, o);
  fit_flags(fit, o);
  fit->add_option("--result", o.result, "key=value result file");

  auto* bench = app.add_subcommand("bench", "Monte Carlo MSE campaign");
  common(bench, o);
  bench->add_option("--samples,-M", o.samples, "Observed samples per trial");
  fit_flags(bench, o);
  bench->add_option("--trials", o.trials, "Trials per cell");
  bench->add_option("--r-values", o.r_values, "Sweep of r values");
  bench->add_option("--sigma-values", o.sigma_values, "Sweep of sigma_z2 values");
  bench->add_option("--campaign-prefix", o.campaign_prefix, "Per-cell trial CSV prefix");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string prov = invocation(argc, argv) + " seed=" + std::to_string(o.seed);
  try {
    if (*simulate) return run_simulate(o, prov);
    if (*density) return run_density(o, prov);
    if (*sweep) return run_ks_sweep(o, prov);
    if (*grid) return run_llf_grid(o, prov);
    if (*fit) return run_fit(o, prov);
    if (*bench) return run_bench(o, prov);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const lrknn::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
