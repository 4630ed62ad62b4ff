#pragma once

#include <Eigen/Dense>
#include <limits>

namespace lossfilt {

/** Per-step instrumentation shared by every filter. Fields not produced by a
 *  given filter stay at their defaults. All likelihood terms are logs. */
struct StepDiagnostics {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  /** Conditional probability that the measurement arrived (soft-update
   *  filter). */
  double lambda = kUnset;
  /** Hard arrival decision, -1 when the filter makes none. */
  int gamma_hat = -1;
  /** Effective particle count before any resampling. */
  double n_eff = kUnset;
  bool resampled = false;
  /** Distinct (belief, gamma) equivalence classes in the particle set. */
  int distinct_groups = 0;
  /** Gaussian density evaluations performed in this step. */
  long pdf_evals = 0;
  /** Kalman measurement+time update pairs executed in this step. */
  long kalman_updates = 0;
  /** Log-likelihood of the received-measurement branch (log of Gaussian
   *  density times arrival prior). */
  double log_lik_received = kUnset;
  /** Same for the lost-measurement branch. */
  double log_lik_lost = kUnset;
  /** Log of the estimated one-step predictive measurement density. */
  double marginal_log_lik = kUnset;
  /** Particle-mixture covariance including the between-particle spread term;
   *  empty unless produced. */
  Eigen::MatrixXd spread_cov;
};

}  // namespace lossfilt
