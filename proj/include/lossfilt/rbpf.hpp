#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lossfilt/diagnostics.hpp"
#include "lossfilt/iekf.hpp"
#include "lossfilt/loss.hpp"
#include "lossfilt/rng.hpp"

namespace lossfilt {

enum class ResampleScheme { kMultinomial, kSystematic };

/** Draw N ancestor indices with replacement, P(index = i) = weights[i].
 *  Consumes N uniforms. Expected count of index i is N * weights[i]. */
inline std::vector<int> multinomial_resample(const std::vector<double>& weights,
                                             RngStream& rng) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw std::invalid_argument("multinomial_resample: no weights");
  std::vector<double> cum(weights.size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += weights[static_cast<std::size_t>(i)];
    cum[static_cast<std::size_t>(i)] = acc;
  }
  std::vector<int> idx(weights.size());
  for (int j = 0; j < n; ++j) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    idx[static_cast<std::size_t>(j)] =
        std::min(n - 1, static_cast<int>(it - cum.begin()));
  }
  return idx;
}

/** 1 / sum(w^2) for normalized weights: N when uniform, 1 for a point mass. */
inline double effective_particle_count(const std::vector<double>& weights) {
  double sq = 0.0;
  for (double w : weights) sq += w * w;
  return 1.0 / sq;
}

/** Low-variance alternative: one uniform, stratified positions (j + u)/N. */
inline std::vector<int> systematic_resample(const std::vector<double>& weights,
                                            RngStream& rng) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw std::invalid_argument("systematic_resample: no weights");
  double total = 0.0;
  for (double w : weights) total += w;
  const double u0 = rng.uniform();
  std::vector<int> idx(weights.size());
  double acc = weights[0];
  int i = 0;
  for (int j = 0; j < n; ++j) {
    const double pos = total * (static_cast<double>(j) + u0) /
                       static_cast<double>(n);
    while (acc <= pos && i + 1 < n) {
      ++i;
      acc += weights[static_cast<std::size_t>(i)];
    }
    idx[static_cast<std::size_t>(j)] = i;
  }
  return idx;
}

/** One particle of the Rao-Blackwellised filter: a sampled arrival indicator
 *  plus the conditional Gaussian beliefs it implies. `log_weight` holds the
 *  normalized log importance weight. `ancestor` is the source index at the
 *  most recent resampling. `group` is a dense id for the equivalence class of
 *  particles with bitwise-identical predictions; it is refined every step by
 *  the drawn indicator and copied by resampling, so duplicate detection never
 *  compares floating-point state. */
struct RbpfParticle {
  int gamma = 1;
  GaussianBelief pred;
  GaussianBelief filt;
  double log_weight = 0.0;
  int ancestor = 0;
  int group = 0;
};

struct RbpfState {
  std::vector<RbpfParticle> particles;
  double n_threshold = 0.0;
  RngStream rng;
  long step_index = 0;
  int group_count = 1;
};

struct RbpfOutput {
  RbpfState state;
  GaussianBelief estimate;
};

/** Initialize N particles at the model prior, each with its own arrival
 *  indicator drawn from the process. `n_threshold` < 0 selects the default
 *  N/2 resampling trigger. */
inline RbpfState rbpf_init(const StateSpaceModel& model,
                           const LossProcess& loss, int n_particles,
                           std::uint64_t seed, double n_threshold = -1.0) {
  if (n_particles < 1)
    throw std::invalid_argument("rbpf_init: need at least one particle");
  RbpfState st{{}, n_threshold, RngStream(seed), 0, 1};
  if (n_threshold < 0.0)
    st.n_threshold = static_cast<double>(n_particles) / 2.0;
  st.particles.resize(static_cast<std::size_t>(n_particles));
  const double lw0 = -std::log(static_cast<double>(n_particles));
  for (int i = 0; i < n_particles; ++i) {
    auto& p = st.particles[static_cast<std::size_t>(i)];
    p.pred = model.initial;
    p.filt = model.initial;
    p.gamma = sample_loss(loss, std::nullopt, st.rng);
    p.log_weight = lw0;
    p.ancestor = i;
    p.group = 0;
  }
  return st;
}

namespace detail {

/** Shared step body. `dedup` selects whether the per-particle conditional
 *  Kalman updates are computed once per duplicate group; everything else
 *  (draws, weights, resampling, estimate summation order) is identical, and
 *  both settings produce bitwise-equal results for the same RNG stream. */
inline RbpfOutput rbpf_step_impl(RbpfState st, const StateSpaceModel& model,
                                 const LossProcess& loss,
                                 const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& u, bool dedup,
                                 StepDiagnostics* diag,
                                 ResampleScheme scheme) {
  const int n = static_cast<int>(st.particles.size());
  auto& ps = st.particles;

  if (st.step_index > 0) {
    for (auto& p : ps) p.gamma = sample_loss(loss, p.gamma, st.rng);
  }

  // Refine duplicate groups by (previous group, drawn indicator), assigning
  // dense ids in first-appearance order.
  std::vector<std::array<int, 2>> pair_id(
      static_cast<std::size_t>(st.group_count), {-1, -1});
  int next_id = 0;
  for (auto& p : ps) {
    int& slot = pair_id[static_cast<std::size_t>(p.group)]
                       [static_cast<std::size_t>(p.gamma)];
    if (slot < 0) slot = next_id++;
    p.group = slot;
  }
  st.group_count = next_id;

  // Importance weights in the log domain, normalized by max-subtraction.
  std::vector<double> weights(static_cast<std::size_t>(n));
  double max_lw = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    auto& p = ps[static_cast<std::size_t>(i)];
    double ll;
    if (p.gamma == 1) {
      const Eigen::MatrixXd C = model.C(p.pred.mean);
      const Eigen::MatrixXd S =
          symmetrize(C * p.pred.cov * C.transpose() + model.R);
      ll = log_gaussian_pdf(model.innov(y, model.h(p.pred.mean)), S);
    } else {
      ll = log_gaussian_pdf(y, model.R);
    }
    p.log_weight += ll;
    max_lw = std::max(max_lw, p.log_weight);
  }
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    weights[static_cast<std::size_t>(i)] =
        std::exp(ps[static_cast<std::size_t>(i)].log_weight - max_lw);
    wsum += weights[static_cast<std::size_t>(i)];
  }
  const double log_norm = max_lw + std::log(wsum);
  for (int i = 0; i < n; ++i) {
    weights[static_cast<std::size_t>(i)] /= wsum;
    ps[static_cast<std::size_t>(i)].log_weight -= log_norm;
  }

  const double n_eff = effective_particle_count(weights);

  const bool resampled = n_eff < st.n_threshold;
  if (resampled) {
    const std::vector<int> idx = scheme == ResampleScheme::kMultinomial
                                     ? multinomial_resample(weights, st.rng)
                                     : systematic_resample(weights, st.rng);
    std::vector<RbpfParticle> fresh(ps.size());
    const double lw0 = -std::log(static_cast<double>(n));
    for (int j = 0; j < n; ++j) {
      fresh[static_cast<std::size_t>(j)] =
          ps[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])];
      fresh[static_cast<std::size_t>(j)].ancestor =
          idx[static_cast<std::size_t>(j)];
      fresh[static_cast<std::size_t>(j)].log_weight = lw0;
    }
    ps.swap(fresh);
    std::fill(weights.begin(), weights.end(),
              1.0 / static_cast<double>(n));
  }

  // Conditional Kalman measurement and time updates, once per particle or
  // once per duplicate group with the results shared.
  long kalman_updates = 0;
  int distinct = 0;
  if (dedup) {
    std::vector<int> rep(static_cast<std::size_t>(st.group_count), -1);
    for (int i = 0; i < n; ++i) {
      auto& p = ps[static_cast<std::size_t>(i)];
      int& r = rep[static_cast<std::size_t>(p.group)];
      if (r < 0) {
        p.filt = gated_measurement_update(p.pred, model, y, p.gamma);
        p.pred = ekf_time_update(p.filt, model, u);
        r = i;
        ++kalman_updates;
      } else {
        const auto& src = ps[static_cast<std::size_t>(r)];
        p.filt = src.filt;
        p.pred = src.pred;
      }
    }
    distinct = static_cast<int>(kalman_updates);
  } else {
    std::vector<char> seen(static_cast<std::size_t>(st.group_count), 0);
    for (int i = 0; i < n; ++i) {
      auto& p = ps[static_cast<std::size_t>(i)];
      if (!seen[static_cast<std::size_t>(p.group)]) {
        seen[static_cast<std::size_t>(p.group)] = 1;
        ++distinct;
      }
      p.filt = gated_measurement_update(p.pred, model, y, p.gamma);
      p.pred = ekf_time_update(p.filt, model, u);
      ++kalman_updates;
    }
  }

  // Mixture estimate in particle-index order; the covariance is the weighted
  // sum of conditional covariances (no between-particle spread term).
  GaussianBelief est;
  est.mean = Eigen::VectorXd::Zero(model.state_dim);
  est.cov = Eigen::MatrixXd::Zero(model.state_dim, model.state_dim);
  for (int i = 0; i < n; ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    est.mean += w * ps[static_cast<std::size_t>(i)].filt.mean;
    est.cov += w * ps[static_cast<std::size_t>(i)].filt.cov;
  }

  if (diag) {
    *diag = StepDiagnostics{};
    diag->n_eff = n_eff;
    diag->resampled = resampled;
    diag->distinct_groups = distinct;
    diag->pdf_evals = n;
    diag->kalman_updates = kalman_updates;
    diag->marginal_log_lik = log_norm;
    diag->spread_cov = est.cov;
    for (int i = 0; i < n; ++i) {
      const double w = weights[static_cast<std::size_t>(i)];
      const Eigen::VectorXd d =
          ps[static_cast<std::size_t>(i)].filt.mean - est.mean;
      diag->spread_cov += w * d * d.transpose();
    }
  }

  ++st.step_index;
  return RbpfOutput{std::move(st), std::move(est)};
}

}  // namespace detail

/** One particle-filter step: draw arrival indicators from the process prior,
 *  reweight by the measurement likelihood of each hypothesis, resample when
 *  the effective particle count drops below the threshold, then run the
 *  conditional Kalman updates and form the weighted mixture estimate. */
inline RbpfOutput rbpf_step(RbpfState st, const StateSpaceModel& model,
                            const LossProcess& loss, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& u,
                            StepDiagnostics* diag = nullptr,
                            ResampleScheme scheme =
                                ResampleScheme::kMultinomial) {
  return detail::rbpf_step_impl(std::move(st), model, loss, y, u, false, diag,
                                scheme);
}

/** Identical to rbpf_step (bit for bit, given the same RNG stream) but
 *  computes the conditional Kalman updates once per duplicate particle group
 *  instead of once per particle. */
inline RbpfOutput rbpf_step_fast(RbpfState st, const StateSpaceModel& model,
                                 const LossProcess& loss,
                                 const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& u,
                                 StepDiagnostics* diag = nullptr,
                                 ResampleScheme scheme =
                                     ResampleScheme::kMultinomial) {
  return detail::rbpf_step_impl(std::move(st), model, loss, y, u, true, diag,
                                scheme);
}

}  // namespace lossfilt
