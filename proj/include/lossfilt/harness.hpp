#pragma once

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "lossfilt/bkf.hpp"
#include "lossfilt/iekf.hpp"
#include "lossfilt/oracle.hpp"
#include "lossfilt/rbpf.hpp"
#include "lossfilt/scenarios.hpp"
#include "lossfilt/simulate.hpp"

namespace lossfilt {

class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FilterKind {
  /** Kalman filter that pretends every measurement arrived. */
  kKfNaive,
  /** Gated filter fed the true arrival indicators. */
  kIekf,
  /** Hard arrival decision per step. */
  kBkf1,
  /** Soft arrival probability per step. */
  kBkf2,
  kRbpf,
  kRbpfFast,
  /** Exhaustive enumeration (linear models, short horizons). */
  kOracle,
};

inline const char* filter_name(FilterKind kind) {
  switch (kind) {
    case FilterKind::kKfNaive: return "kf_naive";
    case FilterKind::kIekf: return "iekf";
    case FilterKind::kBkf1: return "bkf1";
    case FilterKind::kBkf2: return "bkf2";
    case FilterKind::kRbpf: return "rbpf";
    case FilterKind::kRbpfFast: return "rbpf_fast";
    case FilterKind::kOracle: return "oracle";
  }
  return "unknown";
}

inline std::optional<FilterKind> parse_filter(const std::string& name) {
  for (FilterKind kind :
       {FilterKind::kKfNaive, FilterKind::kIekf, FilterKind::kBkf1,
        FilterKind::kBkf2, FilterKind::kRbpf, FilterKind::kRbpfFast,
        FilterKind::kOracle}) {
    if (name == filter_name(kind)) return kind;
  }
  return std::nullopt;
}

/** Knobs shared by every filter run inside the harness. */
struct RunSettings {
  int particles = 20;
  double n_threshold_frac = 0.5;
  ArrivalPriorPolicy bkf2_policy = ArrivalPriorPolicy::kMarginal;
  ResampleScheme resample = ResampleScheme::kMultinomial;
  bool measure_timing = true;
};

struct ExperimentConfig {
  std::string scenario = "linear";
  std::vector<double> loss_probs = {0.3};
  std::vector<FilterKind> filters = {FilterKind::kKfNaive, FilterKind::kIekf,
                                     FilterKind::kBkf1, FilterKind::kBkf2,
                                     FilterKind::kRbpf};
  /** -1 selects the scenario default. */
  int trials = -1;
  /** -1 selects the scenario default. */
  int horizon = -1;
  /** Empty selects the scenario default; `run` uses the first entry. */
  std::vector<int> particles;
  double n_threshold_frac = 0.5;
  std::uint64_t seed = 1;
  bool bad_init = false;
  ArrivalPriorPolicy bkf2_policy = ArrivalPriorPolicy::kMarginal;
  ResampleScheme resample = ResampleScheme::kMultinomial;
  /** 0 selects std::thread::hardware_concurrency(). */
  int threads = 0;
  bool measure_timing = true;
  /** Replaces the scenario's Bernoulli process (e.g. with a Markov chain);
   *  loss_probs entries then serve as labels only. */
  std::optional<LossProcess> loss_override;
};

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.scenario != "linear" && cfg.scenario != "tracking")
    throw std::invalid_argument("unknown scenario: " + cfg.scenario);
  if (cfg.loss_probs.empty())
    throw std::invalid_argument("need at least one loss probability");
  for (double p : cfg.loss_probs) {
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("loss probability outside [0, 1]");
  }
  if (cfg.trials != -1 && cfg.trials < 1)
    throw std::invalid_argument("trials must be positive");
  if (cfg.horizon != -1 && cfg.horizon < 1)
    throw std::invalid_argument("horizon must be positive");
  for (int n : cfg.particles) {
    if (n < 1) throw std::invalid_argument("particle count must be positive");
  }
  if (!(cfg.n_threshold_frac > 0.0 && cfg.n_threshold_frac <= 1.0))
    throw std::invalid_argument("n_threshold_frac must be in (0, 1]");
  if (cfg.threads < 0) throw std::invalid_argument("threads must be >= 0");
  if (cfg.bad_init && cfg.scenario != "tracking")
    throw std::invalid_argument("bad_init applies to tracking only");
  for (FilterKind kind : cfg.filters) {
    if (kind == FilterKind::kOracle) {
      if (cfg.scenario != "linear")
        throw std::invalid_argument("oracle runs on the linear scenario only");
      if (cfg.horizon < 1 || cfg.horizon > 20)
        throw std::invalid_argument(
            "oracle needs an explicit horizon of at most 20");
    }
  }
}

/** Uniform stepping wrapper over the individual filters. kIekf consumes the
 *  true indicator; kKfNaive forces 1; the rest see only the measurement. */
class FilterInstance {
 public:
  FilterInstance(FilterKind kind, const StateSpaceModel& model,
                 const LossProcess& loss, const RunSettings& settings,
                 std::uint64_t filter_seed)
      : kind_(kind), model_(&model), loss_(&loss), settings_(settings) {
    switch (kind_) {
      case FilterKind::kKfNaive:
      case FilterKind::kIekf:
        iekf_ = iekf_init(model);
        break;
      case FilterKind::kBkf1:
        bkf1_ = bkf1_init(model);
        break;
      case FilterKind::kBkf2:
        bkf2_ = bkf2_init(model, loss);
        break;
      case FilterKind::kRbpf:
      case FilterKind::kRbpfFast:
        rbpf_ = rbpf_init(model, loss, settings.particles, filter_seed,
                          settings.n_threshold_frac *
                              static_cast<double>(settings.particles));
        break;
      case FilterKind::kOracle:
        break;
    }
  }

  GaussianBelief step(const Eigen::VectorXd& y, int gamma_true,
                      const Eigen::VectorXd& u,
                      StepDiagnostics* diag = nullptr) {
    switch (kind_) {
      case FilterKind::kKfNaive:
        iekf_ = iekf_step(iekf_, *model_, y, 1, u, diag);
        return iekf_.filt;
      case FilterKind::kIekf:
        iekf_ = iekf_step(iekf_, *model_, y, gamma_true, u, diag);
        return iekf_.filt;
      case FilterKind::kBkf1:
        bkf1_ = bkf1_step(bkf1_, *model_, *loss_, y, u, diag);
        return bkf1_.filt;
      case FilterKind::kBkf2:
        bkf2_ = bkf2_step(bkf2_, *model_, *loss_, y, u, diag,
                          settings_.bkf2_policy);
        return bkf2_.filt;
      case FilterKind::kRbpf: {
        RbpfOutput out = rbpf_step(std::move(rbpf_), *model_, *loss_, y, u,
                                   diag, settings_.resample);
        rbpf_ = std::move(out.state);
        return out.estimate;
      }
      case FilterKind::kRbpfFast: {
        RbpfOutput out = rbpf_step_fast(std::move(rbpf_), *model_, *loss_, y,
                                        u, diag, settings_.resample);
        rbpf_ = std::move(out.state);
        return out.estimate;
      }
      case FilterKind::kOracle: {
        y_hist_.push_back(y);
        u_hist_.push_back(u);
        OraclePosterior post = oracle_exact(*model_, *loss_, y_hist_, u_hist_);
        if (diag) {
          *diag = StepDiagnostics{};
          diag->distinct_groups = static_cast<int>(post.components.size());
        }
        return post.mve;
      }
    }
    throw std::logic_error("unreachable filter kind");
  }

 private:
  FilterKind kind_;
  const StateSpaceModel* model_;
  const LossProcess* loss_;
  RunSettings settings_;
  IekfState iekf_;
  Bkf1State bkf1_;
  Bkf2State bkf2_;
  RbpfState rbpf_{{}, 0.0, RngStream(0), 0, 1};
  std::vector<Eigen::VectorXd> y_hist_;
  std::vector<Eigen::VectorXd> u_hist_;
};

/** Full per-step output of one filter over one trial. Estimates and
 *  diagnostics stop at the step where the filter diverged, if any. */
struct FilterTrace {
  FilterKind kind = FilterKind::kIekf;
  std::vector<GaussianBelief> estimates;
  std::vector<StepDiagnostics> diagnostics;
  bool diverged = false;
  int diverged_at = -1;
  double seconds = 0.0;
};

struct SingleTrialResult {
  TrialRecord record;
  std::vector<FilterTrace> traces;
};

/** Simulate one trial and run every requested filter over the same record.
 *  Divergence (covariance failure or a non-finite estimate) is recorded per
 *  filter, never thrown. Both particle variants get the same filter seed, so
 *  their RNG streams coincide. */
inline SingleTrialResult run_single_trial(const Scenario& scenario,
                                          const std::vector<FilterKind>& kinds,
                                          int horizon,
                                          const RunSettings& settings,
                                          std::uint64_t trial_seed) {
  SingleTrialResult result;
  result.record =
      simulate(scenario.model, scenario.loss, {}, horizon, trial_seed);
  const std::uint64_t filter_seed = mix_seed(trial_seed, stream_tag::kFilter);

  result.traces.reserve(kinds.size());
  for (FilterKind kind : kinds) {
    FilterTrace trace;
    trace.kind = kind;
    trace.estimates.reserve(static_cast<std::size_t>(horizon));
    trace.diagnostics.reserve(static_cast<std::size_t>(horizon));
    FilterInstance filter(kind, scenario.model, scenario.loss, settings,
                          filter_seed);
    const auto start = std::chrono::steady_clock::now();
    try {
      for (int k = 0; k < horizon; ++k) {
        StepDiagnostics diag;
        GaussianBelief est = filter.step(
            result.record.measurements[static_cast<std::size_t>(k)],
            result.record.losses[static_cast<std::size_t>(k)],
            result.record.controls[static_cast<std::size_t>(k)], &diag);
        if (!est.mean.allFinite())
          throw filter_divergence("estimate is not finite", est.cov);
        trace.estimates.push_back(std::move(est));
        trace.diagnostics.push_back(std::move(diag));
      }
    } catch (const filter_divergence&) {
      trace.diverged = true;
      trace.diverged_at = static_cast<int>(trace.estimates.size());
    }
    if (settings.measure_timing) {
      trace.seconds = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    }
    result.traces.push_back(std::move(trace));
  }
  return result;
}

/** Run fn(0) .. fn(count-1) on `threads` workers (index order when
 *  threads <= 1). The first exception, if any, is rethrown after completion.
 */
template <typename Fn>
inline void parallel_for(int count, int threads, Fn&& fn) {
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct FilterRunStats {
  FilterKind filter = FilterKind::kIekf;
  double loss_prob = 0.0;
  std::vector<double> rmse_per_step;
  double summed_rmse = 0.0;
  long diverged_trials = 0;
  double sec_per_iter = 0.0;
  double pdf_evals_per_iter = 0.0;
};

struct RmseReport {
  int horizon = 0;
  int trials = 0;
  std::vector<FilterRunStats> entries;
};

/** Monte Carlo error study. For every loss probability, `trials` records are
 *  simulated (trial seeds derived from the base seed and the trial index, so
 *  results do not depend on worker scheduling) and every filter runs on each
 *  record. Per-step RMSE averages the squared error of the scenario's error
 *  components over the trials that survived; diverged (filter, trial) pairs
 *  are counted and excluded. Accumulation happens in trial-index order. */
inline RmseReport run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);

  RmseReport report;
  int threads = cfg.threads;
  if (threads == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }

  struct ReducedFilter {
    bool diverged = false;
    std::vector<double> sqerr;
    double seconds = 0.0;
    long pdf_evals = 0;
  };
  struct ReducedTrial {
    std::vector<ReducedFilter> per_filter;
  };

  for (double p : cfg.loss_probs) {
    Scenario scenario = build_scenario(cfg.scenario, p, cfg.bad_init);
    if (cfg.loss_override) scenario.loss = *cfg.loss_override;
    validate_model(scenario.model);
    const int horizon =
        cfg.horizon > 0 ? cfg.horizon : scenario.default_horizon;
    const int trials = cfg.trials > 0 ? cfg.trials : scenario.default_trials;
    RunSettings settings;
    settings.particles = cfg.particles.empty() ? scenario.default_particles
                                               : cfg.particles.front();
    settings.n_threshold_frac = cfg.n_threshold_frac;
    settings.bkf2_policy = cfg.bkf2_policy;
    settings.resample = cfg.resample;
    settings.measure_timing = cfg.measure_timing;
    report.horizon = horizon;
    report.trials = trials;

    std::vector<ReducedTrial> reduced(static_cast<std::size_t>(trials));
    parallel_for(trials, threads, [&](int t) {
      SingleTrialResult full =
          run_single_trial(scenario, cfg.filters, horizon, settings,
                           mix_seed(cfg.seed, static_cast<std::uint64_t>(t)));
      ReducedTrial& out = reduced[static_cast<std::size_t>(t)];
      out.per_filter.resize(cfg.filters.size());
      for (std::size_t fi = 0; fi < cfg.filters.size(); ++fi) {
        const FilterTrace& trace = full.traces[fi];
        ReducedFilter& rf = out.per_filter[fi];
        rf.diverged = trace.diverged;
        rf.seconds = trace.seconds;
        if (trace.diverged) continue;
        rf.sqerr.resize(static_cast<std::size_t>(horizon));
        for (int k = 0; k < horizon; ++k) {
          double s = 0.0;
          for (int idx : scenario.error_indices) {
            const double d =
                full.record.states[static_cast<std::size_t>(k)][idx] -
                trace.estimates[static_cast<std::size_t>(k)].mean[idx];
            s += d * d;
          }
          rf.sqerr[static_cast<std::size_t>(k)] = s;
          rf.pdf_evals +=
              trace.diagnostics[static_cast<std::size_t>(k)].pdf_evals;
        }
      }
    });

    for (std::size_t fi = 0; fi < cfg.filters.size(); ++fi) {
      FilterRunStats stats;
      stats.filter = cfg.filters[fi];
      stats.loss_prob = p;
      stats.rmse_per_step.assign(static_cast<std::size_t>(horizon), 0.0);
      double seconds = 0.0;
      long pdf_evals = 0;
      for (int t = 0; t < trials; ++t) {
        const ReducedFilter& rf =
            reduced[static_cast<std::size_t>(t)].per_filter[fi];
        if (rf.diverged) {
          ++stats.diverged_trials;
          continue;
        }
        for (int k = 0; k < horizon; ++k)
          stats.rmse_per_step[static_cast<std::size_t>(k)] +=
              rf.sqerr[static_cast<std::size_t>(k)];
        seconds += rf.seconds;
        pdf_evals += rf.pdf_evals;
      }
      const long survivors = trials - stats.diverged_trials;
      for (double& v : stats.rmse_per_step) {
        v = survivors > 0 ? std::sqrt(v / static_cast<double>(survivors))
                          : std::numeric_limits<double>::quiet_NaN();
        stats.summed_rmse += v;
      }
      const double iters = static_cast<double>(survivors) *
                           static_cast<double>(horizon);
      stats.sec_per_iter = iters > 0.0 ? seconds / iters : 0.0;
      stats.pdf_evals_per_iter =
          iters > 0.0 ? static_cast<double>(pdf_evals) / iters : 0.0;
      report.entries.push_back(std::move(stats));
    }
  }
  return report;
}

struct SweepRow {
  FilterKind filter = FilterKind::kRbpf;
  int particles = 0;
  double sec_per_iter = 0.0;
  double pdf_evals_per_iter = 0.0;
};

/** Per-iteration cost of the two particle variants as a function of particle
 *  count, measured as the median step wall time over one simulated record of
 *  `iterations` steps (at least 100). */
inline std::vector<SweepRow> timing_sweep(const Scenario& scenario,
                                          const std::vector<int>& n_list,
                                          int iterations, std::uint64_t seed,
                                          double n_threshold_frac = 0.5) {
  iterations = std::max(iterations, 100);
  const TrialRecord record =
      simulate(scenario.model, scenario.loss, {}, iterations, seed);
  const std::uint64_t filter_seed = mix_seed(seed, stream_tag::kFilter);

  std::vector<SweepRow> rows;
  for (int n : n_list) {
    for (FilterKind kind : {FilterKind::kRbpf, FilterKind::kRbpfFast}) {
      RunSettings settings;
      settings.particles = n;
      settings.n_threshold_frac = n_threshold_frac;
      FilterInstance filter(kind, scenario.model, scenario.loss, settings,
                            filter_seed);
      std::vector<double> durations(static_cast<std::size_t>(iterations));
      long pdf_evals = 0;
      for (int k = 0; k < iterations; ++k) {
        StepDiagnostics diag;
        const auto start = std::chrono::steady_clock::now();
        filter.step(record.measurements[static_cast<std::size_t>(k)],
                    record.losses[static_cast<std::size_t>(k)],
                    record.controls[static_cast<std::size_t>(k)], &diag);
        durations[static_cast<std::size_t>(k)] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                          start)
                .count();
        pdf_evals += diag.pdf_evals;
      }
      auto mid = durations.begin() + durations.size() / 2;
      std::nth_element(durations.begin(), mid, durations.end());
      SweepRow row;
      row.filter = kind;
      row.particles = n;
      row.sec_per_iter = *mid;
      row.pdf_evals_per_iter =
          static_cast<double>(pdf_evals) / static_cast<double>(iterations);
      rows.push_back(row);
    }
  }
  return rows;
}

/** Formats with 17 significant digits, enough for exact double round-trips.
 */
inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/** Writes per-step RMSE rows to `per_step_path` and a run summary to
 *  `summary.csv` next to it. UTF-8, LF line endings, 17 significant digits.
 */
inline void emit_csv(const RmseReport& report,
                     const std::string& per_step_path) {
  std::ofstream out(per_step_path, std::ios::binary);
  if (!out) throw io_error("cannot open " + per_step_path);
  out << "filter,loss_prob,step,rmse\n";
  for (const auto& entry : report.entries) {
    for (std::size_t k = 0; k < entry.rmse_per_step.size(); ++k) {
      out << filter_name(entry.filter) << ',' << format_g17(entry.loss_prob)
          << ',' << k << ',' << format_g17(entry.rmse_per_step[k]) << '\n';
    }
  }
  if (!out.good()) throw io_error("write failed: " + per_step_path);
  out.close();

  const std::filesystem::path summary_path =
      std::filesystem::path(per_step_path).parent_path() / "summary.csv";
  std::ofstream sum(summary_path, std::ios::binary);
  if (!sum) throw io_error("cannot open " + summary_path.string());
  sum << "filter,loss_prob,summed_rmse,diverged_trials,sec_per_iter,"
         "pdf_evals_per_iter\n";
  for (const auto& entry : report.entries) {
    sum << filter_name(entry.filter) << ',' << format_g17(entry.loss_prob)
        << ',' << format_g17(entry.summed_rmse) << ','
        << entry.diverged_trials << ',' << format_g17(entry.sec_per_iter)
        << ',' << format_g17(entry.pdf_evals_per_iter) << '\n';
  }
  if (!sum.good()) throw io_error("write failed: " + summary_path.string());
}

/** Writes timing-sweep rows. Same formatting rules as emit_csv. */
inline void emit_sweep_csv(const std::vector<SweepRow>& rows,
                           const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open " + path);
  out << "filter,particles,sec_per_iter,pdf_evals_per_iter\n";
  for (const auto& row : rows) {
    out << filter_name(row.filter) << ',' << row.particles << ','
        << format_g17(row.sec_per_iter) << ','
        << format_g17(row.pdf_evals_per_iter) << '\n';
  }
  if (!out.good()) throw io_error("write failed: " + path);
}

}  // namespace lossfilt
