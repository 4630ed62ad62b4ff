#pragma once

#include "lossfilt/diagnostics.hpp"
#include "lossfilt/gaussian.hpp"
#include "lossfilt/model.hpp"

namespace lossfilt {

/** Extended Kalman filter state with an explicit arrival gate: the
 *  measurement update is applied only when the measurement arrived.
 *  `pred` is the one-step prediction consumed by the next step; `filt` is the
 *  latest filtered belief. */
struct IekfState {
  GaussianBelief pred;
  GaussianBelief filt;
};

inline IekfState iekf_init(const StateSpaceModel& model) {
  return IekfState{model.initial, model.initial};
}

/** Prediction through the dynamics: mean via f, covariance via the Jacobian
 *  at the filtered mean plus process noise, symmetrized. */
inline GaussianBelief ekf_time_update(const GaussianBelief& filt,
                                      const StateSpaceModel& model,
                                      const Eigen::VectorXd& u) {
  const Eigen::MatrixXd A = model.A(filt.mean, u);
  GaussianBelief pred;
  pred.mean = model.f(filt.mean, u);
  pred.cov = symmetrize(A * filt.cov * A.transpose() + model.Q);
  return pred;
}

/** Gated measurement update. With gamma = 1 applies the usual EKF correction
 *  (gain from the innovation covariance via Cholesky); with gamma = 0 the
 *  prediction passes through unchanged. `joseph` selects the Joseph-form
 *  covariance update. */
inline GaussianBelief gated_measurement_update(const GaussianBelief& pred,
                                               const StateSpaceModel& model,
                                               const Eigen::VectorXd& y,
                                               int gamma, bool joseph = false) {
  if (gamma == 0) return pred;
  const Eigen::MatrixXd C = model.C(pred.mean);
  const Eigen::MatrixXd S =
      symmetrize(C * pred.cov * C.transpose() + model.R);
  const auto llt = chol_spd(S, "measurement update");
  const Eigen::MatrixXd K = llt.solve(C * pred.cov).transpose();
  GaussianBelief filt;
  filt.mean = pred.mean + K * model.innov(y, model.h(pred.mean));
  if (joseph) {
    const Eigen::MatrixXd ikc =
        Eigen::MatrixXd::Identity(pred.cov.rows(), pred.cov.cols()) - K * C;
    filt.cov = symmetrize(ikc * pred.cov * ikc.transpose() +
                          K * model.R * K.transpose());
  } else {
    filt.cov = symmetrize(pred.cov - K * C * pred.cov);
  }
  return filt;
}

/** One filter step: gated measurement update with the supplied gamma, then
 *  time update. Pure: returns the successor state. */
inline IekfState iekf_step(const IekfState& state,
                           const StateSpaceModel& model,
                           const Eigen::VectorXd& y, int gamma,
                           const Eigen::VectorXd& u,
                           StepDiagnostics* diag = nullptr,
                           bool joseph = false) {
  IekfState next;
  next.filt = gated_measurement_update(state.pred, model, y, gamma, joseph);
  next.pred = ekf_time_update(next.filt, model, u);
  if (diag) {
    *diag = StepDiagnostics{};
    diag->gamma_hat = gamma;
    diag->kalman_updates = 1;
  }
  return next;
}

}  // namespace lossfilt
