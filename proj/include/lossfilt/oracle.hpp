#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lossfilt/bkf.hpp"
#include "lossfilt/iekf.hpp"
#include "lossfilt/loss.hpp"

namespace lossfilt {

/** One arrival sequence hypothesis: the sequence itself, its normalized log
 *  posterior weight, and the Gaussian filtering belief it conditions. */
struct OracleComponent {
  std::vector<int> losses;
  double log_weight = 0.0;
  GaussianBelief belief;
};

/** Exact posterior over every arrival sequence, with the minimum-variance
 *  estimate of the state (mixture mean, and mixture covariance including the
 *  between-component spread). */
struct OraclePosterior {
  std::vector<OracleComponent> components;
  GaussianBelief mve;
};

/** Exhaustive posterior for linear models over a short horizon: enumerates
 *  all 2^T arrival sequences for the T supplied measurements, runs the gated
 *  Kalman recursion per sequence, and weights each sequence by its joint
 *  likelihood times its process prior. Complexity 2^T; rejects T > 20 and
 *  nonlinear models. `controls` may be empty. */
inline OraclePosterior oracle_exact(
    const StateSpaceModel& model, const LossProcess& loss,
    const std::vector<Eigen::VectorXd>& measurements,
    const std::vector<Eigen::VectorXd>& controls) {
  const int horizon = static_cast<int>(measurements.size());
  if (!model.linear)
    throw std::invalid_argument("oracle_exact: model must be linear");
  if (horizon < 1 || horizon > 20)
    throw std::invalid_argument("oracle_exact: horizon must be in [1, 20]");

  const Eigen::VectorXd u0 = model.zero_control();
  const std::uint64_t count = 1ull << horizon;
  OraclePosterior post;
  post.components.resize(count);

  double max_lw = -std::numeric_limits<double>::infinity();
  for (std::uint64_t bits = 0; bits < count; ++bits) {
    auto& comp = post.components[bits];
    comp.losses.resize(static_cast<std::size_t>(horizon));
    double lw = 0.0;
    IekfState kf = iekf_init(model);
    std::optional<int> prev;
    for (int k = 0; k < horizon; ++k) {
      const int gamma = static_cast<int>((bits >> k) & 1ull);
      comp.losses[static_cast<std::size_t>(k)] = gamma;
      const Eigen::VectorXd& y = measurements[static_cast<std::size_t>(k)];
      const Eigen::VectorXd& u =
          controls.empty() ? u0 : controls[static_cast<std::size_t>(k)];

      const double prior1 = loss_prior(loss, prev);
      lw += gamma == 1 ? std::log(prior1) : std::log1p(-prior1);
      const BranchLogLik ll = branch_log_lik(kf.pred, model, y);
      lw += gamma == 1 ? ll.received : ll.lost;

      kf = iekf_step(kf, model, y, gamma, u);
      prev = gamma;
    }
    comp.log_weight = lw;
    comp.belief = kf.filt;
    max_lw = std::max(max_lw, lw);
  }

  double wsum = 0.0;
  for (auto& comp : post.components)
    wsum += std::exp(comp.log_weight - max_lw);
  const double log_norm = max_lw + std::log(wsum);
  for (auto& comp : post.components) comp.log_weight -= log_norm;

  post.mve.mean = Eigen::VectorXd::Zero(model.state_dim);
  for (const auto& comp : post.components)
    post.mve.mean += std::exp(comp.log_weight) * comp.belief.mean;
  post.mve.cov = Eigen::MatrixXd::Zero(model.state_dim, model.state_dim);
  for (const auto& comp : post.components) {
    const double w = std::exp(comp.log_weight);
    const Eigen::VectorXd d = comp.belief.mean - post.mve.mean;
    post.mve.cov += w * (comp.belief.cov + d * d.transpose());
  }
  return post;
}

}  // namespace lossfilt
