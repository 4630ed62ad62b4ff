// Command-line front end: Monte Carlo error studies (`run`), per-iteration
// particle cost sweeps (`sweep-particles`), and small-horizon comparisons of
// the particle filter against exhaustive enumeration (`oracle-check`).
//
// Exit codes: 0 success, 1 configuration or usage error, 2 I/O error.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lossfilt/lossfilt.hpp"

namespace {

namespace fs = std::filesystem;

struct RunOptions {
  std::string scenario = "linear";
  std::vector<double> loss_probs = {0.3};
  std::vector<std::string> filters = {"kf_naive", "iekf", "bkf1", "bkf2",
                                      "rbpf"};
  int trials = -1;
  int horizon = -1;
  std::vector<int> particles;
  double n_threshold = 0.5;
  std::uint64_t seed = 1;
  bool bad_init = false;
  std::string bkf2_prior = "marginal";
  std::string resample = "multinomial";
  int threads = 0;
  bool no_timing = false;
  double markov_p = -1.0;
  double markov_q = -1.0;
  double markov_init = -1.0;
  std::string out_dir = "results";
};

struct SweepOptions {
  std::string scenario = "linear";
  double loss_prob = 0.3;
  std::vector<int> particles = {20, 50, 100, 200, 500};
  int iterations = 200;
  std::uint64_t seed = 1;
  double n_threshold = 0.5;
  std::string out = "particles_sweep.csv";
};

struct OracleCheckOptions {
  double loss_prob = 0.5;
  int horizon = 8;
  std::vector<int> particles = {50, 500, 5000};
  int seeds = 20;
  std::uint64_t seed_base = 1000;
  std::uint64_t sim_seed = 424242;
  std::string out = "oracle_check.csv";
};

std::vector<lossfilt::FilterKind> parse_filters(
    const std::vector<std::string>& names) {
  std::vector<lossfilt::FilterKind> kinds;
  kinds.reserve(names.size());
  for (const std::string& name : names) {
    const auto kind = lossfilt::parse_filter(name);
    if (!kind) throw std::invalid_argument("unknown filter: " + name);
    kinds.push_back(*kind);
  }
  return kinds;
}

lossfilt::ArrivalPriorPolicy parse_policy(const std::string& name) {
  if (name == "marginal") return lossfilt::ArrivalPriorPolicy::kMarginal;
  if (name == "propagated") return lossfilt::ArrivalPriorPolicy::kPropagated;
  if (name == "previous") return lossfilt::ArrivalPriorPolicy::kPrevious;
  throw std::invalid_argument("unknown arrival prior policy: " + name);
}

lossfilt::ResampleScheme parse_resample(const std::string& name) {
  if (name == "multinomial") return lossfilt::ResampleScheme::kMultinomial;
  if (name == "systematic") return lossfilt::ResampleScheme::kSystematic;
  throw std::invalid_argument("unknown resampling scheme: " + name);
}

int do_run(const RunOptions& opts, bool loss_prob_given) {
  lossfilt::ExperimentConfig cfg;
  cfg.scenario = opts.scenario;
  cfg.loss_probs = opts.loss_probs;
  cfg.filters = parse_filters(opts.filters);
  cfg.trials = opts.trials;
  cfg.horizon = opts.horizon;
  cfg.particles = opts.particles;
  cfg.n_threshold_frac = opts.n_threshold;
  cfg.seed = opts.seed;
  cfg.bad_init = opts.bad_init;
  cfg.bkf2_policy = parse_policy(opts.bkf2_prior);
  cfg.resample = parse_resample(opts.resample);
  cfg.threads = opts.threads;
  cfg.measure_timing = !opts.no_timing;

  const bool markov_given = opts.markov_p >= 0.0 || opts.markov_q >= 0.0;
  if (markov_given) {
    if (opts.markov_p < 0.0 || opts.markov_q < 0.0)
      throw std::invalid_argument(
          "--markov-p and --markov-q must be given together");
    const double init = opts.markov_init >= 0.0
                            ? opts.markov_init
                            : opts.markov_q / (opts.markov_p + opts.markov_q);
    cfg.loss_override =
        lossfilt::LossProcess::markov(opts.markov_p, opts.markov_q, init);
    if (!loss_prob_given)
      cfg.loss_probs = {1.0 - cfg.loss_override->stationary_prob()};
  }

  const lossfilt::RmseReport report = lossfilt::run_experiment(cfg);

  fs::create_directories(opts.out_dir);
  const fs::path per_step = fs::path(opts.out_dir) / "rmse.csv";
  lossfilt::emit_csv(report, per_step.string());

  std::printf("%-10s %9s %12s %9s %13s %16s\n", "filter", "loss_prob",
              "summed_rmse", "diverged", "sec_per_iter", "pdf_evals_per_it");
  for (const auto& entry : report.entries) {
    std::printf("%-10s %9.3g %12.5g %9ld %13.3e %16.1f\n",
                lossfilt::filter_name(entry.filter), entry.loss_prob,
                entry.summed_rmse, entry.diverged_trials, entry.sec_per_iter,
                entry.pdf_evals_per_iter);
  }
  std::printf("wrote %s and %s\n", per_step.string().c_str(),
              (fs::path(opts.out_dir) / "summary.csv").string().c_str());
  return 0;
}

int do_sweep(const SweepOptions& opts) {
  const lossfilt::Scenario scenario =
      lossfilt::build_scenario(opts.scenario, opts.loss_prob);
  const auto rows = lossfilt::timing_sweep(scenario, opts.particles,
                                           opts.iterations, opts.seed,
                                           opts.n_threshold);
  lossfilt::emit_sweep_csv(rows, opts.out);

  std::printf("%-10s %9s %13s %16s\n", "filter", "particles", "sec_per_iter",
              "pdf_evals_per_it");
  for (const auto& row : rows) {
    std::printf("%-10s %9d %13.3e %16.1f\n", lossfilt::filter_name(row.filter),
                row.particles, row.sec_per_iter, row.pdf_evals_per_iter);
  }
  std::printf("wrote %s\n", opts.out.c_str());
  return 0;
}

int do_oracle_check(const OracleCheckOptions& opts) {
  const lossfilt::Scenario scenario = lossfilt::build_linear(opts.loss_prob);
  const lossfilt::StateSpaceModel& m = scenario.model;
  const lossfilt::TrialRecord rec =
      lossfilt::simulate(m, scenario.loss, {}, opts.horizon, opts.sim_seed);
  const Eigen::VectorXd u = m.zero_control();

  std::vector<Eigen::VectorXd> exact_mean(
      static_cast<std::size_t>(opts.horizon));
  for (int k = 0; k < opts.horizon; ++k) {
    const std::vector<Eigen::VectorXd> prefix(
        rec.measurements.begin(), rec.measurements.begin() + k + 1);
    exact_mean[static_cast<std::size_t>(k)] =
        lossfilt::oracle_exact(m, scenario.loss, prefix, {}).mve.mean;
  }

  std::ofstream out(opts.out, std::ios::binary);
  if (!out) throw lossfilt::io_error("cannot open " + opts.out);
  out << "particles";
  for (int d = 0; d < m.state_dim; ++d) out << ",mad_component_" << d;
  out << '\n';

  for (int n : opts.particles) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(m.state_dim);
    for (int s = 0; s < opts.seeds; ++s) {
      lossfilt::RbpfState st = lossfilt::rbpf_init(
          m, scenario.loss, n,
          opts.seed_base + static_cast<std::uint64_t>(s));
      for (int k = 0; k < opts.horizon; ++k) {
        lossfilt::RbpfOutput step = lossfilt::rbpf_step(
            std::move(st), m, scenario.loss,
            rec.measurements[static_cast<std::size_t>(k)], u);
        st = std::move(step.state);
        acc += (step.estimate.mean - exact_mean[static_cast<std::size_t>(k)])
                   .cwiseAbs();
      }
    }
    acc /= static_cast<double>(opts.seeds * opts.horizon);

    out << n;
    std::printf("particles %6d  mean abs deviation per component:", n);
    for (int d = 0; d < m.state_dim; ++d) {
      out << ',' << lossfilt::format_g17(acc[d]);
      std::printf(" %.4f", acc[d]);
    }
    out << '\n';
    std::printf("\n");
  }
  if (!out.good()) throw lossfilt::io_error("write failed: " + opts.out);
  std::printf("wrote %s\n", opts.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Bayesian state estimation with randomly lost measurements: Monte "
      "Carlo error studies, particle cost sweeps, and exhaustive-posterior "
      "checks"};
  app.require_subcommand(1);
  // Options typed after a subcommand that the subcommand does not know
  // (notably --config) are matched against the top-level app instead.
  app.fallthrough();
  app.set_config("--config", "",
                 "Read options from an INI file; keys live in a section named "
                 "after the subcommand, e.g. [run] (command line wins on "
                 "conflicts)");

  RunOptions run_opts;
  CLI::App* run = app.add_subcommand(
      "run", "Monte Carlo error study; writes rmse.csv and summary.csv");
  run->add_option("--scenario", run_opts.scenario,
                  "Scenario name (linear | tracking)")
      ->capture_default_str();
  CLI::Option* loss_opt =
      run->add_option("--loss-prob", run_opts.loss_probs,
                      "Measurement loss probabilities to sweep")
          ->delimiter(',')
          ->capture_default_str();
  run->add_option("--filters", run_opts.filters,
                  "Filters to run (kf_naive iekf bkf1 bkf2 rbpf rbpf_fast "
                  "oracle)")
      ->delimiter(',')
      ->capture_default_str();
  run->add_option("--trials", run_opts.trials,
                  "Monte Carlo trials (-1 = scenario default)")
      ->capture_default_str();
  run->add_option("--horizon", run_opts.horizon,
                  "Steps per trial (-1 = scenario default)")
      ->capture_default_str();
  run->add_option("--particles", run_opts.particles,
                  "Particle counts; the first entry is used")
      ->delimiter(',');
  run->add_option("--n-threshold", run_opts.n_threshold,
                  "Resampling trigger as a fraction of the particle count")
      ->capture_default_str();
  run->add_option("--seed", run_opts.seed, "Base seed")
      ->capture_default_str();
  run->add_flag("--bad-init", run_opts.bad_init,
                "Mismatched filter prior (tracking scenario only)");
  run->add_option("--bkf2-prior", run_opts.bkf2_prior,
                  "Arrival prior policy for the soft filter")
      ->check(CLI::IsMember({"marginal", "propagated", "previous"}))
      ->capture_default_str();
  run->add_option("--resample", run_opts.resample, "Resampling scheme")
      ->check(CLI::IsMember({"multinomial", "systematic"}))
      ->capture_default_str();
  run->add_option("--threads", run_opts.threads,
                  "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();
  run->add_flag("--no-timing", run_opts.no_timing,
                "Skip wall-clock measurement for bit-stable CSV output");
  run->add_option("--markov-p", run_opts.markov_p,
                  "Markov arrivals: P(loss next | received now); replaces "
                  "the Bernoulli process");
  run->add_option("--markov-q", run_opts.markov_q,
                  "Markov arrivals: P(received next | lost now)");
  run->add_option("--markov-init", run_opts.markov_init,
                  "Markov arrivals: P(first measurement received); default "
                  "is the stationary probability");
  run->add_option("--out", run_opts.out_dir, "Output directory")
      ->capture_default_str();

  SweepOptions sweep_opts;
  CLI::App* sweep = app.add_subcommand(
      "sweep-particles",
      "Median per-iteration cost of the particle variants vs particle count");
  sweep->add_option("--scenario", sweep_opts.scenario,
                    "Scenario name (linear | tracking)")
      ->capture_default_str();
  sweep->add_option("--loss-prob", sweep_opts.loss_prob,
                    "Measurement loss probability")
      ->capture_default_str();
  sweep->add_option("--n", sweep_opts.particles, "Particle counts to sweep")
      ->delimiter(',')
      ->capture_default_str();
  sweep->add_option("--iterations", sweep_opts.iterations,
                    "Steps to time (at least 100)")
      ->capture_default_str();
  sweep->add_option("--seed", sweep_opts.seed, "Base seed")
      ->capture_default_str();
  sweep->add_option("--n-threshold", sweep_opts.n_threshold,
                    "Resampling trigger as a fraction of the particle count")
      ->capture_default_str();
  sweep->add_option("--out", sweep_opts.out, "Output CSV path")
      ->capture_default_str();

  OracleCheckOptions oracle_opts;
  CLI::App* oracle = app.add_subcommand(
      "oracle-check",
      "Mean absolute deviation of the particle mixture mean from the "
      "exhaustive posterior (linear scenario, short horizons)");
  oracle->add_option("--loss-prob", oracle_opts.loss_prob,
                     "Measurement loss probability")
      ->capture_default_str();
  oracle->add_option("--horizon", oracle_opts.horizon,
                     "Steps (at most 20; enumeration is 2^horizon)")
      ->capture_default_str();
  oracle->add_option("--particles", oracle_opts.particles,
                     "Particle counts to evaluate")
      ->delimiter(',')
      ->capture_default_str();
  oracle->add_option("--seeds", oracle_opts.seeds,
                     "Number of filter seeds to average over")
      ->capture_default_str();
  oracle->add_option("--seed-base", oracle_opts.seed_base,
                     "First filter seed")
      ->capture_default_str();
  oracle->add_option("--sim-seed", oracle_opts.sim_seed,
                     "Seed of the simulated record")
      ->capture_default_str();
  oracle->add_option("--out", oracle_opts.out, "Output CSV path")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) return do_run(run_opts, loss_opt->count() > 0);
    if (sweep->parsed()) return do_sweep(sweep_opts);
    if (oracle->parsed()) return do_oracle_check(oracle_opts);
  } catch (const lossfilt::io_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
