#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lossfilt/loss.hpp"
#include "lossfilt/model.hpp"

namespace lossfilt {

/** A named, ready-to-run experiment setup: model, arrival process, which
 *  state components enter the error metric, and default experiment sizes. */
struct Scenario {
  std::string name;
  StateSpaceModel model;
  LossProcess loss;
  std::vector<int> error_indices;
  int default_horizon = 0;
  int default_trials = 0;
  int default_particles = 0;
};

/** Two-state linear plant with one marginally stable mode and a scalar
 *  measurement; measurements are lost i.i.d. with probability `loss_prob`. */
inline Scenario build_linear(double loss_prob) {
  if (loss_prob < 0.0 || loss_prob > 1.0)
    throw std::invalid_argument("build_linear: loss_prob outside [0, 1]");
  Eigen::MatrixXd A(2, 2);
  A << 0.6, 0.4, 0.1, 0.9;
  Eigen::MatrixXd C(1, 2);
  C << 1.0, -2.0;

  StateSpaceModel m;
  m.state_dim = 2;
  m.meas_dim = 1;
  m.f = [A](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd(A * x);
  };
  m.h = [C](const Eigen::VectorXd& x) { return Eigen::VectorXd(C * x); };
  m.jac_f = [A](const Eigen::VectorXd&, const Eigen::VectorXd&) { return A; };
  m.jac_h = [C](const Eigen::VectorXd&) { return C; };
  m.Q = Eigen::MatrixXd::Identity(2, 2);
  m.R = Eigen::MatrixXd::Identity(1, 1);
  m.initial = GaussianBelief{Eigen::VectorXd::Zero(2),
                             Eigen::MatrixXd::Identity(2, 2)};
  m.linear = true;

  Scenario s;
  s.name = "linear";
  s.model = std::move(m);
  s.loss = LossProcess::bernoulli(1.0 - loss_prob);
  s.error_indices = {0, 1};
  s.default_horizon = 200;
  s.default_trials = 500;
  s.default_particles = 20;
  return s;
}

/** Maps an angle to (-pi, pi]. */
inline double wrap_to_pi(double a) {
  constexpr double kPi = 3.141592653589793238;
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

/** Planar target tracked in range and bearing. Per axis the state is
 *  (position, velocity, acceleration) with near-constant-acceleration
 *  kinematics; the full state stacks the two axes. The bearing innovation is
 *  wrapped to (-pi, pi]. With `bad_init` the filter prior mean is moved to
 *  200 m per axis while the true initial state still starts near 10 m. */
inline Scenario build_tracking(double loss_prob, bool bad_init = false) {
  if (loss_prob < 0.0 || loss_prob > 1.0)
    throw std::invalid_argument("build_tracking: loss_prob outside [0, 1]");
  constexpr double kPi = 3.141592653589793238;
  const double tau = 0.01;
  const double sigma_m = 4.0;
  const double alpha = 1.0;
  const double sigma_r = 5.0;
  const double sigma_phi = 5.0 * kPi / 180.0;

  Eigen::Matrix3d f_axis;
  f_axis << 1.0, tau, tau * tau / 2.0,
            0.0, 1.0, tau,
            0.0, 0.0, 1.0;
  Eigen::Matrix3d q_axis;
  const double t2 = tau * tau, t3 = t2 * tau, t4 = t3 * tau, t5 = t4 * tau;
  q_axis << t5 / 20.0, t4 / 8.0, t3 / 6.0,
            t4 / 8.0,  t3 / 3.0, t2 / 2.0,
            t3 / 6.0,  t2 / 2.0, tau;
  q_axis *= 2.0 * alpha * sigma_m * sigma_m;

  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(6, 6);
  F.topLeftCorner(3, 3) = f_axis;
  F.bottomRightCorner(3, 3) = f_axis;
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(6, 6);
  Q.topLeftCorner(3, 3) = q_axis;
  Q.bottomRightCorner(3, 3) = q_axis;

  Eigen::Matrix3d p_axis;
  p_axis << sigma_r * sigma_r, sigma_r * sigma_r / tau, 0.0,
            sigma_r * sigma_r / tau, 2.0 * sigma_r * sigma_r / (tau * tau), 0.0,
            0.0, 0.0, 0.0;
  Eigen::MatrixXd P0 = Eigen::MatrixXd::Zero(6, 6);
  P0.topLeftCorner(3, 3) = p_axis;
  P0.bottomRightCorner(3, 3) = p_axis;

  Eigen::VectorXd true_mean(6);
  true_mean << 10.0, 0.0, 0.0, 10.0, 0.0, 0.0;

  StateSpaceModel m;
  m.state_dim = 6;
  m.meas_dim = 2;
  m.f = [F](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd(F * x);
  };
  m.jac_f = [F](const Eigen::VectorXd&, const Eigen::VectorXd&) { return F; };
  m.h = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(2);
    y[0] = std::sqrt(x[0] * x[0] + x[3] * x[3]);
    y[1] = std::atan2(x[3], x[0]);
    return y;
  };
  m.jac_h = [](const Eigen::VectorXd& x) {
    const double p1 = x[0], p2 = x[3];
    const double r2 = p1 * p1 + p2 * p2;
    const double r = std::sqrt(r2);
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2, 6);
    jac(0, 0) = p1 / r;
    jac(0, 3) = p2 / r;
    jac(1, 0) = -p2 / r2;
    jac(1, 3) = p1 / r2;
    return jac;
  };
  m.innovation = [](const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
    Eigen::VectorXd v = y - yhat;
    v[1] = wrap_to_pi(v[1]);
    return v;
  };
  m.Q = Q;
  m.R = Eigen::Vector2d(sigma_r * sigma_r, sigma_phi * sigma_phi).asDiagonal();
  m.initial = GaussianBelief{true_mean, P0};
  if (bad_init) {
    m.sim_initial = m.initial;
    Eigen::VectorXd off(6);
    off << 200.0, 0.0, 0.0, 200.0, 0.0, 0.0;
    m.initial.mean = off;
  }
  m.linear = false;

  Scenario s;
  s.name = "tracking";
  s.model = std::move(m);
  s.loss = LossProcess::bernoulli(1.0 - loss_prob);
  s.error_indices = {0, 3};
  s.default_horizon = 100;
  s.default_trials = 1500;
  s.default_particles = 200;
  return s;
}

/** Scenario lookup by name; throws std::invalid_argument for unknown names. */
inline Scenario build_scenario(const std::string& name, double loss_prob,
                               bool bad_init = false) {
  if (name == "linear") {
    if (bad_init)
      throw std::invalid_argument("bad_init applies to tracking only");
    return build_linear(loss_prob);
  }
  if (name == "tracking") return build_tracking(loss_prob, bad_init);
  throw std::invalid_argument("unknown scenario: " + name);
}

}  // namespace lossfilt
