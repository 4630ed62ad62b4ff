#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "lossfilt/gaussian.hpp"

namespace lossfilt {

using TransitionFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                                   const Eigen::VectorXd&)>;
using MeasurementFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using TransitionJacFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&,
                                                      const Eigen::VectorXd&)>;
using MeasurementJacFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
using InnovationFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&,
                                                   const Eigen::VectorXd&)>;

/** Discrete-time state-space model
 *    x_{k+1} = f(x_k, u_k) + w_k,   w_k ~ N(0, Q)
 *    y_k     = gamma_k * h(x_k) + v_k,   v_k ~ N(0, R)
 *  with Gaussian prior `initial` on x_0. Jacobians are optional; accessors
 *  fall back to central finite differences. `innovation` customizes residual
 *  computation (e.g. angle wrapping); it defaults to y - yhat.
 *  `sim_initial`, when set, is the distribution the true x_0 is drawn from,
 *  letting the filter prior deliberately mismatch reality. */
struct StateSpaceModel {
  int state_dim = 0;
  int meas_dim = 0;
  TransitionFn f;
  MeasurementFn h;
  TransitionJacFn jac_f;
  MeasurementJacFn jac_h;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  GaussianBelief initial;
  std::optional<GaussianBelief> sim_initial;
  InnovationFn innovation;
  bool linear = false;

  Eigen::MatrixXd A(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const;
  Eigen::MatrixXd C(const Eigen::VectorXd& x) const;
  Eigen::VectorXd innov(const Eigen::VectorXd& y,
                        const Eigen::VectorXd& yhat) const {
    return innovation ? innovation(y, yhat) : Eigen::VectorXd(y - yhat);
  }
  const GaussianBelief& simulation_initial() const {
    return sim_initial ? *sim_initial : initial;
  }
  Eigen::VectorXd zero_control() const { return Eigen::VectorXd::Zero(0); }
};

/** Central-difference Jacobian of g at x, step 1e-6 * (1 + |x_i|) per
 *  coordinate. */
inline Eigen::MatrixXd finite_difference_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& x) {
  const Eigen::VectorXd g0 = g(x);
  Eigen::MatrixXd jac(g0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = 1e-6 * (1.0 + std::abs(x[i]));
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    jac.col(i) = (g(hi) - g(lo)) / (2.0 * step);
  }
  return jac;
}

inline Eigen::MatrixXd StateSpaceModel::A(const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& u) const {
  if (jac_f) return jac_f(x, u);
  return finite_difference_jacobian(
      [&](const Eigen::VectorXd& xi) { return f(xi, u); }, x);
}

inline Eigen::MatrixXd StateSpaceModel::C(const Eigen::VectorXd& x) const {
  if (jac_h) return jac_h(x);
  return finite_difference_jacobian(h, x);
}

/** First-order model expansion around a filtering point (for f) and a
 *  prediction point (for h):
 *    f(x, u) ~ A x + b,   h(x) ~ C x + z. */
struct Linearization {
  Eigen::MatrixXd A;
  Eigen::MatrixXd C;
  Eigen::VectorXd b;
  Eigen::VectorXd z;
};

inline Linearization linearize(const StateSpaceModel& model,
                               const Eigen::VectorXd& x_filt,
                               const Eigen::VectorXd& x_pred,
                               const Eigen::VectorXd& u) {
  Linearization lin;
  lin.A = model.A(x_filt, u);
  lin.C = model.C(x_pred);
  lin.b = model.f(x_filt, u) - lin.A * x_filt;
  lin.z = model.h(x_pred) - lin.C * x_pred;
  return lin;
}

/** Structural checks: positive dimensions, both maps present, noise
 *  covariances symmetric positive semidefinite with matching shapes, and a
 *  consistent prior. Throws std::invalid_argument on the first violation. */
inline void validate_model(const StateSpaceModel& model) {
  if (model.state_dim < 1 || model.meas_dim < 1)
    throw std::invalid_argument("model: dimensions must be positive");
  if (!model.f || !model.h)
    throw std::invalid_argument("model: f and h are required");
  auto check_psd = [](const Eigen::MatrixXd& m, int dim, const char* name) {
    if (m.rows() != dim || m.cols() != dim)
      throw std::invalid_argument(std::string("model: bad shape for ") + name);
    const double scale = 1.0 + m.cwiseAbs().maxCoeff();
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
      throw std::invalid_argument(std::string("model: ") + name +
                                  " is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(
        m + 1e-12 * scale * Eigen::MatrixXd::Identity(dim, dim));
    if (llt.info() != Eigen::Success)
      throw std::invalid_argument(std::string("model: ") + name +
                                  " is not positive semidefinite");
  };
  check_psd(model.Q, model.state_dim, "Q");
  check_psd(model.R, model.meas_dim, "R");
  if (model.initial.mean.size() != model.state_dim)
    throw std::invalid_argument("model: prior mean has the wrong dimension");
  check_psd(model.initial.cov, model.state_dim, "prior covariance");
  if (model.sim_initial) {
    if (model.sim_initial->mean.size() != model.state_dim)
      throw std::invalid_argument(
          "model: simulation prior mean has the wrong dimension");
    check_psd(model.sim_initial->cov, model.state_dim,
              "simulation prior covariance");
  }
}

}  // namespace lossfilt
