#pragma once

#include <cmath>
#include <optional>

#include "lossfilt/diagnostics.hpp"
#include "lossfilt/iekf.hpp"
#include "lossfilt/loss.hpp"

namespace lossfilt {

/** 1 / (1 + exp(-z)), stable for large |z| and exact at +-inf. */
inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/** Log-likelihoods of the two arrival hypotheses for measurement y given a
 *  prediction: received (Gaussian around h(pred) with innovation covariance)
 *  versus lost (pure measurement noise around zero). Prior log-masses are
 *  added by the caller. Two Gaussian density evaluations. */
struct BranchLogLik {
  double received;
  double lost;
};

inline BranchLogLik branch_log_lik(const GaussianBelief& pred,
                                   const StateSpaceModel& model,
                                   const Eigen::VectorXd& y) {
  const Eigen::MatrixXd C = model.C(pred.mean);
  const Eigen::MatrixXd S =
      symmetrize(C * pred.cov * C.transpose() + model.R);
  BranchLogLik ll;
  ll.received = log_gaussian_pdf(model.innov(y, model.h(pred.mean)), S);
  ll.lost = log_gaussian_pdf(y, model.R);
  return ll;
}

/** Filter that picks the posterior-mode arrival hypothesis each step and
 *  runs the gated update with it. Remembers only the previous decision (used
 *  by Markov arrival priors). */
struct Bkf1State {
  GaussianBelief pred;
  GaussianBelief filt;
  std::optional<int> gamma_hat_prev;
};

inline Bkf1State bkf1_init(const StateSpaceModel& model) {
  return Bkf1State{model.initial, model.initial, std::nullopt};
}

inline Bkf1State bkf1_step(const Bkf1State& state,
                           const StateSpaceModel& model,
                           const LossProcess& loss, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& u,
                           StepDiagnostics* diag = nullptr) {
  const double prior1 = loss_prior(loss, state.gamma_hat_prev);
  const BranchLogLik ll = branch_log_lik(state.pred, model, y);
  const double l1 = ll.received + std::log(prior1);
  const double l0 = ll.lost + std::log1p(-prior1);
  const int gamma_hat = l1 > l0 ? 1 : 0;

  Bkf1State next;
  next.filt = gated_measurement_update(state.pred, model, y, gamma_hat);
  next.pred = ekf_time_update(next.filt, model, u);
  next.gamma_hat_prev = gamma_hat;
  if (diag) {
    *diag = StepDiagnostics{};
    diag->gamma_hat = gamma_hat;
    diag->log_lik_received = l1;
    diag->log_lik_lost = l0;
    diag->pdf_evals = 2;
    diag->kalman_updates = 1;
  }
  return next;
}

/** How the soft-update filter forms its predictive arrival probability from
 *  the previous step's posterior arrival probability. */
enum class ArrivalPriorPolicy {
  /** Marginal of the arrival process: theta for Bernoulli, chain-propagated
   *  for Markov. Default. */
  kMarginal,
  /** One-step propagation of the previous posterior through the transition
   *  kernel (coincides with kMarginal for both supported processes). */
  kPropagated,
  /** Previous posterior reused verbatim. */
  kPrevious,
};

/** Filter that weights the measurement update by the conditional probability
 *  that the measurement arrived. `lambda` is that probability for the latest
 *  step. */
struct Bkf2State {
  GaussianBelief pred;
  GaussianBelief filt;
  double lambda = 1.0;
};

inline Bkf2State bkf2_init(const StateSpaceModel& model,
                           const LossProcess& loss) {
  return Bkf2State{model.initial, model.initial,
                   loss_prior(loss, std::nullopt)};
}

inline double predictive_arrival_prob(const LossProcess& loss,
                                      double lambda_prev,
                                      ArrivalPriorPolicy policy) {
  switch (policy) {
    case ArrivalPriorPolicy::kPrevious:
      return lambda_prev;
    case ArrivalPriorPolicy::kMarginal:
    case ArrivalPriorPolicy::kPropagated:
      break;
  }
  if (loss.kind == LossProcess::Kind::Bernoulli) return loss.theta;
  return lambda_prev * (1.0 - loss.failure_rate) +
         (1.0 - lambda_prev) * loss.recovery_rate;
}

inline Bkf2State bkf2_step(
    const Bkf2State& state, const StateSpaceModel& model,
    const LossProcess& loss, const Eigen::VectorXd& y,
    const Eigen::VectorXd& u, StepDiagnostics* diag = nullptr,
    ArrivalPriorPolicy policy = ArrivalPriorPolicy::kMarginal) {
  const double pi1 = predictive_arrival_prob(loss, state.lambda, policy);
  const BranchLogLik ll = branch_log_lik(state.pred, model, y);
  const double l1 = ll.received + std::log(pi1);
  const double l0 = ll.lost + std::log1p(-pi1);
  const double lambda = logistic(l1 - l0);

  const GaussianBelief& pred = state.pred;
  const Eigen::MatrixXd C = model.C(pred.mean);
  const Eigen::MatrixXd S =
      symmetrize(C * pred.cov * C.transpose() + model.R);
  const auto llt = chol_spd(S, "soft measurement update");
  const Eigen::MatrixXd K = llt.solve(C * pred.cov).transpose();
  const Eigen::VectorXd correction = K * model.innov(y, model.h(pred.mean));

  Bkf2State next;
  next.filt.mean = pred.mean + lambda * correction;
  next.filt.cov =
      symmetrize(pred.cov - lambda * (K * C * pred.cov) +
                 (lambda * (1.0 - lambda)) * correction * correction.transpose());
  next.pred = ekf_time_update(next.filt, model, u);
  next.lambda = lambda;
  if (diag) {
    *diag = StepDiagnostics{};
    diag->lambda = lambda;
    diag->log_lik_received = l1;
    diag->log_lik_lost = l0;
    diag->pdf_evals = 2;
    diag->kalman_updates = 1;
  }
  return next;
}

}  // namespace lossfilt
