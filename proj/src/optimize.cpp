#include "lrknn/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>
#include <random>

#include <boost/math/special_functions/expint.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "lrknn/error.hpp"
#include "lrknn/goodness_of_fit.hpp"
#include "lrknn/parallel.hpp"
#include "lrknn/seed.hpp"

namespace lrknn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kEulerGamma = 0.57721566490153286061;

// E[ln y] for the unit-mean Rician intensity: ln(r/(1+r)) + E1(r).
double rician_log_mean(double r) {
  if (r < 1e-4) return -kEulerGamma - std::log1p(r) + r - 0.25 * r * r;
  return -std::log1p(1.0 / r) + boost::math::expint(1, r);
}

// 2 E[ln y] + ln E[y^2]; increases from ln 2 - 2 gamma at r = 0 towards 0.
double log_moment_gap(double r) {
  const double second = (r * r + 4.0 * r + 2.0) / ((1.0 + r) * (1.0 + r));
  return 2.0 * rician_log_mean(r) + std::log(second);
}

}  // namespace

void Bounds::validate() const {
  if (!(r_lo >= 0.0 && r_hi >= r_lo && std::isfinite(r_hi))) {
    throw InvalidArgument("r bounds must satisfy 0 <= r_lo <= r_hi < inf");
  }
  if (!(sigma_lo > 0.0 && sigma_hi >= sigma_lo && std::isfinite(sigma_hi))) {
    throw InvalidArgument("sigma_z2 bounds must satisfy 0 < lo <= hi < inf");
  }
  if (k_lo < 2 || k_hi < k_lo) throw InvalidArgument("k bounds must satisfy 2 <= k_lo <= k_hi");
}

bool Bounds::contains(const Candidate& c) const {
  return c.r >= r_lo && c.r <= r_hi && c.sigma_z2 >= sigma_lo && c.sigma_z2 <= sigma_hi &&
         c.k >= k_lo && c.k <= k_hi;
}

Candidate Bounds::clamp(const Candidate& c) const {
  return {std::clamp(c.r, r_lo, r_hi), std::clamp(c.sigma_z2, sigma_lo, sigma_hi),
          std::clamp(c.k, k_lo, k_hi)};
}

void FitConfig::validate() const {
  bounds.validate();
  llf.validate();
  if (ga.population < 2) throw InvalidArgument("GA population must be >= 2");
  if (ga.generations < 1) throw InvalidArgument("GA needs at least one generation");
  if (ga.tournament_size < 1) throw InvalidArgument("tournament size must be >= 1");
  if (ga.elite >= ga.population) throw InvalidArgument("elite count must be below population");
  if (!(gd.step_r > 0.0 && gd.step_sigma > 0.0 && gd.eps_r > 0.0 && gd.eps_sigma > 0.0)) {
    throw InvalidArgument("GD steps and offsets must be positive");
  }
  if (llf.L < static_cast<std::size_t>(bounds.k_hi) + 1) {
    throw InvalidArgument("L must exceed the largest k in the bounds");
  }
}

ShapingParams initial_estimates(const SampleSet& observed, const Bounds& bounds) {
  bounds.validate();
  double log_sum = 0.0;
  double square_sum = 0.0;
  for (double v : observed.values()) {
    log_sum += std::log(v);
    square_sum += v * v;
  }
  const auto count = static_cast<double>(observed.size());
  const double mean_log = log_sum / count;
  const double sigma0 = -2.0 * mean_log;

  const double target = std::log(square_sum / count) + 2.0 * mean_log;
  double r0;
  if (target <= log_moment_gap(bounds.r_lo)) {
    r0 = bounds.r_lo;
  } else if (target >= log_moment_gap(bounds.r_hi)) {
    r0 = bounds.r_hi;
  } else {
    double lo = bounds.r_lo;
    double hi = bounds.r_hi;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (log_moment_gap(mid) < target ? lo : hi) = mid;
    }
    r0 = 0.5 * (lo + hi);
  }
  return {std::clamp(r0, bounds.r_lo, bounds.r_hi),
          std::clamp(sigma0, bounds.sigma_lo, bounds.sigma_hi)};
}

Objective llf_objective(const SampleSet& observed, const LlfConfig& cfg) {
  auto sorted = std::make_shared<const SampleSet>(observed.is_sorted() ? observed
                                                                       : observed.sorted());
  return [sorted, cfg](const Candidate& c, std::uint64_t seed) {
    LlfConfig local = cfg;
    local.k = c.k;
    local.seed = seed;
    return llf_mean(*sorted, c.params(), local).value;
  };
}

namespace {

class Recorder {
 public:
  explicit Recorder(std::vector<TraceEntry>& trace) : trace_(trace) {}

  void add(const Candidate& c, double value, std::uint64_t seed) {
    trace_.push_back({trace_.size(), c, value, seed});
  }

 private:
  std::vector<TraceEntry>& trace_;
};

void finish(FitResult& result, const TraceEntry& best) {
  if (!std::isfinite(best.objective)) {
    throw FitFailure("objective is -inf at every probed candidate (no sample overlap)");
  }
  result.params = best.candidate.params();
  result.k = best.candidate.k;
  result.objective = best.objective;
  result.seed = best.seed;
  result.evaluations = result.trace.size();
}

FitResult run_ga(const Objective& objective, const FitConfig& cfg, const Candidate& start) {
  const Bounds& b = cfg.bounds;
  const GaConfig& ga = cfg.ga;
  std::mt19937_64 rng(derive_seed(cfg.llf.seed, streams::kGaOperators));
  boost::random::uniform_real_distribution<double> unit(0.0, 1.0);
  boost::random::normal_distribution<double> normal;

  std::vector<Candidate> population(ga.population);
  population[0] = b.clamp(start);
  for (std::size_t i = 1; i < population.size(); ++i) {
    population[i].r = b.r_lo + unit(rng) * (b.r_hi - b.r_lo);
    population[i].sigma_z2 = b.sigma_lo + unit(rng) * (b.sigma_hi - b.sigma_lo);
    population[i].k = boost::random::uniform_int_distribution<int>(b.k_lo, b.k_hi)(rng);
  }

  FitResult result;
  Recorder recorder(result.trace);
  TraceEntry best{0, population[0], kNegInf, 0};
  std::vector<double> fitness(population.size());
  std::vector<std::uint64_t> seeds(population.size());

  for (std::size_t gen = 0; gen < ga.generations; ++gen) {
    const std::size_t base = result.trace.size();
    for (std::size_t i = 0; i < population.size(); ++i) {
      seeds[i] = derive_seed(cfg.llf.seed, streams::kFitEval, base + i);
    }
    parallel_for(population.size(), cfg.threads,
                 [&](std::size_t i) { fitness[i] = objective(population[i], seeds[i]); });
    for (std::size_t i = 0; i < population.size(); ++i) {
      recorder.add(population[i], fitness[i], seeds[i]);
      if (fitness[i] > best.objective) best = result.trace.back();
    }
    if (gen + 1 == ga.generations) break;

    std::vector<std::size_t> order(population.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t c) { return fitness[a] > fitness[c]; });
    boost::random::uniform_int_distribution<std::size_t> any(0, population.size() - 1);
    auto tournament = [&]() {
      std::size_t winner = any(rng);
      for (std::size_t t = 1; t < ga.tournament_size; ++t) {
        const std::size_t pick = any(rng);
        if (fitness[pick] > fitness[winner]) winner = pick;
      }
      return population[winner];
    };

    const double decay = 1.0 - static_cast<double>(gen + 1) / static_cast<double>(ga.generations);
    const double kick_r = ga.mutation_scale * (b.r_hi - b.r_lo) * decay;
    const double kick_sigma = ga.mutation_scale * (b.sigma_hi - b.sigma_lo) * decay;
    const double kick_k = ga.mutation_scale * (b.k_hi - b.k_lo) * decay;

    std::vector<Candidate> next;
    next.reserve(population.size());
    for (std::size_t e = 0; e < ga.elite; ++e) next.push_back(population[order[e]]);
    while (next.size() < population.size()) {
      Candidate child = tournament();
      if (unit(rng) < ga.crossover_rate) {
        const Candidate other = tournament();
        if (unit(rng) < 0.5) child.r = other.r;
        if (unit(rng) < 0.5) child.sigma_z2 = other.sigma_z2;
        if (unit(rng) < 0.5) child.k = other.k;
      }
      if (unit(rng) < ga.mutation_rate) child.r += kick_r * normal(rng);
      if (unit(rng) < ga.mutation_rate) child.sigma_z2 += kick_sigma * normal(rng);
      if (unit(rng) < ga.mutation_rate) {
        child.k += static_cast<int>(std::lround(kick_k * normal(rng)));
      }
      next.push_back(b.clamp(child));
    }
    population = std::move(next);
  }

  // The single best value is the luckiest draw of a noisy objective. Rescore
  // the leading distinct candidates under fresh seeds and keep the best mean.
  std::vector<TraceEntry> leaders;
  {
    std::vector<TraceEntry> ranked = result.trace;
    std::stable_sort(ranked.begin(), ranked.end(), [](const TraceEntry& a, const TraceEntry& c) {
      return a.objective > c.objective;
    });
    for (const auto& e : ranked) {
      if (leaders.size() >= ga.rescore_top || !std::isfinite(e.objective)) break;
      if (std::none_of(leaders.begin(), leaders.end(),
                       [&](const TraceEntry& l) { return l.candidate == e.candidate; })) {
        leaders.push_back(e);
      }
    }
  }
  if (leaders.size() > 1 && ga.rescore_seeds > 0) {
    const std::size_t base = result.trace.size();
    const std::size_t jobs = leaders.size() * ga.rescore_seeds;
    std::vector<double> values(jobs);
    std::vector<std::uint64_t> job_seeds(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
      job_seeds[j] = derive_seed(cfg.llf.seed, streams::kFitEval, base + j);
    }
    parallel_for(jobs, cfg.threads, [&](std::size_t j) {
      values[j] = objective(leaders[j / ga.rescore_seeds].candidate, job_seeds[j]);
    });
    double best_mean = kNegInf;
    for (std::size_t i = 0; i < leaders.size(); ++i) {
      double sum = 0.0;
      for (std::size_t s = 0; s < ga.rescore_seeds; ++s) {
        const std::size_t j = i * ga.rescore_seeds + s;
        recorder.add(leaders[i].candidate, values[j], job_seeds[j]);
        sum += values[j];
      }
      const double mean = sum / static_cast<double>(ga.rescore_seeds);
      if (mean > best_mean) {
        best_mean = mean;
        // Report the first fresh evaluation: it is reproducible from its seed
        // and not selected on.
        best = result.trace[base + i * ga.rescore_seeds];
      }
    }
  }
  finish(result, best);
  return result;
}

FitResult run_gd(const Objective& objective, const FitConfig& cfg, const Candidate& start) {
  const Bounds& b = cfg.bounds;
  const GdConfig& gd = cfg.gd;
  FitResult result;
  Recorder recorder(result.trace);

  std::size_t eval_counter = 0;
  auto next_seed = [&]() { return derive_seed(cfg.llf.seed, streams::kFitEval, eval_counter++); };
  auto eval = [&](const Candidate& c, std::uint64_t seed) {
    const double value = objective(c, seed);
    recorder.add(c, value, seed);
    return value;
  };

  Candidate x = b.clamp(start);
  TraceEntry current{0, x, kNegInf, 0};
  const double nominal_step[2] = {gd.step_r, gd.step_sigma};
  double length[2] = {gd.step_r, gd.step_sigma};
  int last_sign[2] = {0, 0};
  double eps[2] = {gd.eps_r, gd.eps_sigma};
  const double eps_cap[2] = {gd.max_step_fraction * gd.step_r,
                             gd.max_step_fraction * gd.step_sigma};

  // Evaluation noise, estimated from one point scored under independent
  // seeds: the start three times, then the centre of consecutive iterations
  // that did not move. Accepted values won a comparison and would bias it.
  double noise_sum = 0.0;
  std::size_t noise_pairs = 0;
  auto add_noise_pair = [&](double a, double c) {
    if (std::isfinite(a) && std::isfinite(c)) noise_sum += 0.5 * (a - c) * (a - c), ++noise_pairs;
  };
  TraceEntry last_centre{0, x, kNegInf, 0};
  {
    const double a = eval(x, next_seed());
    const double c = eval(x, next_seed());
    const double d = eval(x, next_seed());
    add_noise_pair(a, c);
    add_noise_pair(c, d);
    last_centre.objective = d;
  }
  std::size_t failures = 0;

  for (std::size_t iter = 0; iter < gd.max_iters; ++iter) {
    const double sd = noise_pairs > 0 ? std::sqrt(noise_sum / noise_pairs) : 0.0;
    const double z = gd.significance;
    const std::uint64_t shared = next_seed();
    auto seed_for = [&]() { return gd.common_random_numbers ? shared : next_seed(); };

    if (gd.k_policy == KPolicy::Search) {
      double best_k_value = kNegInf;
      int best_k = x.k;
      for (int k = x.k - gd.search_radius; k <= x.k + gd.search_radius; ++k) {
        if (k < b.k_lo || k > b.k_hi) continue;
        Candidate probe = x;
        probe.k = k;
        const double v = eval(probe, seed_for());
        if (v > best_k_value) {
          best_k_value = v;
          best_k = k;
        }
      }
      x.k = best_k;
    }

    const std::uint64_t base_seed = seed_for();
    double f0 = eval(x, base_seed);
    if (last_centre.candidate == x) add_noise_pair(last_centre.objective, f0);
    last_centre = {0, x, f0, base_seed};

    // Central differences on (r, sigma_z2), clipped to the box. The same
    // three points give the curvature along each axis. Differences that do
    // not stand out of the noise are not used.
    double grad[2] = {0.0, 0.0};
    double curv[2] = {0.0, 0.0};
    bool grad_ok[2] = {false, false};
    double f_axis_plus[2] = {kNegInf, kNegInf};
    double h_axis_plus[2] = {0.0, 0.0};
    const double lo[2] = {b.r_lo, b.sigma_lo};
    const double hi[2] = {b.r_hi, b.sigma_hi};
    const double at[2] = {x.r, x.sigma_z2};
    Candidate best_probe = x;
    double best_probe_value = f0;
    std::uint64_t best_probe_seed = base_seed;
    for (int axis = 0; axis < 2; ++axis) {
      Candidate plus = x;
      Candidate minus = x;
      double& p = axis == 0 ? plus.r : plus.sigma_z2;
      double& m = axis == 0 ? minus.r : minus.sigma_z2;
      p = std::min(p + eps[axis], hi[axis]);
      m = std::max(m - eps[axis], lo[axis]);
      if (p - m <= 0.0) continue;
      const std::uint64_t s_plus = seed_for();
      const std::uint64_t s_minus = seed_for();
      const double f_plus = eval(plus, s_plus);
      const double f_minus = eval(minus, s_minus);
      f_axis_plus[axis] = f_plus;
      h_axis_plus[axis] = p - at[axis];
      if (std::isfinite(f_plus) && std::isfinite(f_minus)) {
        grad[axis] = (f_plus - f_minus) / (p - m);
        grad_ok[axis] = std::abs(f_plus - f_minus) > z * sd * std::sqrt(2.0);
        if (std::isfinite(f0) && p > at[axis] && m < at[axis] &&
            f0 - 0.5 * (f_plus + f_minus) > 0.5 * z * sd * std::sqrt(6.0)) {
          curv[axis] =
              2.0 * ((f_plus - f0) / (p - at[axis]) - (f0 - f_minus) / (at[axis] - m)) / (p - m);
        }
      }
      if (f_plus > best_probe_value) {
        best_probe = plus, best_probe_value = f_plus, best_probe_seed = s_plus;
      }
      if (f_minus > best_probe_value) {
        best_probe = minus, best_probe_value = f_minus, best_probe_seed = s_minus;
      }
    }

    if (!std::isfinite(f0)) {
      // Outside the region where the synthetic support covers the data:
      // jump to the best finite probe if there is one.
      if (!std::isfinite(best_probe_value)) break;
      x = best_probe;
      current = {0, x, best_probe_value, best_probe_seed};
      continue;
    }
    current = {0, x, f0, base_seed};

    // The (r, sigma_z2) estimates are strongly correlated, so the surface is
    // a tilted ridge. One more probe gives the mixed derivative and with it a
    // Newton step along the ridge; where the local quadratic is not concave
    // the step falls back to the gradient scaled by the nominal steps.
    double mixed = 0.0;
    bool have_mixed = false;
    if (h_axis_plus[0] > 0.0 && h_axis_plus[1] > 0.0 && std::isfinite(f_axis_plus[0]) &&
        std::isfinite(f_axis_plus[1])) {
      const Candidate both{x.r + h_axis_plus[0], x.sigma_z2 + h_axis_plus[1], x.k};
      const std::uint64_t s_both = seed_for();
      const double f_both = eval(both, s_both);
      if (f_both > best_probe_value) {
        best_probe = both, best_probe_value = f_both, best_probe_seed = s_both;
      }
      const double cross = f_both - f_axis_plus[0] - f_axis_plus[1] + f0;
      if (std::isfinite(f_both)) {
        mixed = std::abs(cross) > 2.0 * z * sd ? cross / (h_axis_plus[0] * h_axis_plus[1]) : 0.0;
        have_mixed = true;
      }
    }

    double dir[2] = {0.0, 0.0};
    bool newton[2] = {false, false};
    const double det = curv[0] * curv[1] - mixed * mixed;
    if (have_mixed && curv[0] < 0.0 && det > 0.0) {
      // Solve H d = -g for the negative definite 2 x 2 Hessian.
      dir[0] = -(curv[1] * grad[0] - mixed * grad[1]) / det;
      dir[1] = -(curv[0] * grad[1] - mixed * grad[0]) / det;
      newton[0] = newton[1] = true;
    } else {
      for (int axis = 0; axis < 2; ++axis) {
        if (curv[axis] < 0.0) {
          dir[axis] = -grad[axis] / curv[axis];
          newton[axis] = true;
        }
      }
    }
    // Axes without a usable curvature move by their own step length in the
    // uphill direction; that length doubles while the sign of the gradient
    // persists and halves when it flips.
    // An axis whose difference is lost in the noise stays put and probes
    // wider next time.
    for (int axis = 0; axis < 2; ++axis) {
      const double cap = gd.max_step_fraction * nominal_step[axis];
      if (!grad_ok[axis]) {
        eps[axis] = std::min(2.0 * eps[axis], eps_cap[axis]);
        dir[axis] = 0.0;
        continue;
      }
      eps[axis] = std::max(0.5 * eps[axis], axis == 0 ? gd.eps_r : gd.eps_sigma);
      if (!newton[axis]) {
        const int sign = (grad[axis] > 0.0) - (grad[axis] < 0.0);
        if (sign != 0 && sign == last_sign[axis]) {
          length[axis] = std::min(2.0 * length[axis], cap);
        } else if (sign != 0 && last_sign[axis] != 0) {
          length[axis] = std::max(0.5 * length[axis], gd.min_step_fraction * nominal_step[axis]);
        }
        dir[axis] = sign * length[axis];
      }
      last_sign[axis] = (grad[axis] > 0.0) - (grad[axis] < 0.0);
      dir[axis] = std::clamp(dir[axis], -cap, cap);
    }
    const bool any_signal = grad_ok[0] || grad_ok[1];
    // A capped Newton step can point downhill; fall back to the gradient then.
    if (any_signal && dir[0] * grad[0] + dir[1] * grad[1] <= 0.0) {
      double g[2];
      for (int axis = 0; axis < 2; ++axis) g[axis] = grad_ok[axis] ? grad[axis] : 0.0;
      const double norm = std::hypot(g[0] * nominal_step[0], g[1] * nominal_step[1]);
      for (int axis = 0; axis < 2; ++axis) {
        dir[axis] = nominal_step[axis] * nominal_step[axis] * g[axis] / norm;
      }
    }
    if (!any_signal) {
      // Keep widening the offsets until they reach their cap.
      if (sd == 0.0 || (eps[0] >= eps_cap[0] && eps[1] >= eps_cap[1])) break;
      continue;
    }

    bool moved = false;
    for (double fraction = 1.0; fraction >= gd.min_step_fraction; fraction *= 0.5) {
      Candidate trial = b.clamp({x.r + fraction * dir[0], x.sigma_z2 + fraction * dir[1], x.k});
      if (trial == x) break;
      const std::uint64_t s_trial = seed_for();
      const double f_trial = eval(trial, s_trial);
      // Without common random numbers f0 is not comparable to f_trial under
      // a different seed, but the acceptance rule is the same.
      if (f_trial > f0) {
        x = trial;
        current = {0, x, f_trial, s_trial};
        moved = true;
        break;
      }
    }
    if (moved) {
      failures = 0;
    } else if (sd == 0.0 || ++failures > gd.patience) {
      // A deterministic objective has converged; a noisy one gets a few
      // more tries with fresh draws before it is declared stuck.
      break;
    }
  }

  if (!std::isfinite(current.objective)) {
    // Nothing finite along the path; fall back to the best traced value.
    for (const auto& entry : result.trace) {
      if (entry.objective > current.objective) current = entry;
    }
  }
  finish(result, current);
  return result;
}

}  // namespace

FitResult maximize(const Objective& objective, const FitConfig& cfg, const Candidate& start) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  FitResult result = cfg.method == FitMethod::GA ? run_ga(objective, cfg, start)
                                                 : run_gd(objective, cfg, start);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

FitResult fit(const SampleSet& observed, const FitConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  Candidate start;
  if (cfg.start) {
    start = *cfg.start;
  } else {
    const ShapingParams init = initial_estimates(observed, cfg.bounds);
    start = {init.r, init.sigma_z2, cfg.llf.k};
  }
  start = cfg.bounds.clamp(start);
  if (cfg.method == FitMethod::GD && cfg.gd.k_policy == KPolicy::Sweep) {
    const int k_hi = std::min<int>(cfg.bounds.k_hi, static_cast<int>(cfg.llf.L) - 1);
    const KSweepResult sweep =
        k_sweep(start.params(), cfg.llf.L, cfg.bounds.k_lo, k_hi, cfg.gd.sweep_runs,
                derive_seed(cfg.llf.seed, streams::kKSweep), cfg.threads);
    start.k = sweep.argmin_k;
  }
  FitResult result = maximize(llf_objective(observed, cfg.llf), cfg, start);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

void write_trace_csv(std::ostream& out, const FitResult& result, const std::string& provenance) {
  if (!provenance.empty()) out << "# " << provenance << '\n';
  out << "eval_index,r,sigma_z2,k,llf\n";
  const auto old_precision = out.precision(17);
  for (const auto& e : result.trace) {
    out << e.index << ',' << e.candidate.r << ',' << e.candidate.sigma_z2 << ',' << e.candidate.k
        << ',' << e.objective << '\n';
  }
  out.precision(old_precision);
}

void write_result_text(std::ostream& out, const FitResult& result) {
  const auto old_precision = out.precision(17);
  out << "r=" << result.params.r << '\n'
      << "sigma_z2=" << result.params.sigma_z2 << '\n'
      << "k=" << result.k << '\n'
      << "llf=" << result.objective << '\n'
      << "evaluations=" << result.evaluations << '\n'
      << "seconds=" << result.wall_time << '\n';
  out.precision(old_precision);
}

}  // namespace lrknn
