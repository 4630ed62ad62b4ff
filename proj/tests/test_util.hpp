#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "lossfilt/lossfilt.hpp"

namespace testutil {

/** Plain textbook Kalman filter written independently of the library: gain
 *  via an explicit inverse, no gating, no shared helpers. Used as the
 *  reference implementation in equivalence tests. */
struct TextbookKf {
  Eigen::VectorXd x;
  Eigen::MatrixXd P;

  void update(const Eigen::MatrixXd& C, const Eigen::MatrixXd& R,
              const Eigen::VectorXd& y) {
    const Eigen::MatrixXd S = C * P * C.transpose() + R;
    const Eigen::MatrixXd K = P * C.transpose() * S.inverse();
    x = x + K * (y - C * x);
    P = P - K * C * P;
    P = 0.5 * (P + P.transpose());
  }

  void predict(const Eigen::MatrixXd& A, const Eigen::MatrixXd& Q) {
    x = A * x;
    P = A * P * A.transpose() + Q;
    P = 0.5 * (P + P.transpose());
  }
};

/** Scalar Gaussian log density from the closed-form expression; independent
 *  of the library's factorization-based evaluation. */
inline double scalar_normal_logpdf(double x, double mean, double var) {
  constexpr double kTwoPi = 6.283185307179586477;
  const double d = x - mean;
  return -0.5 * (std::log(kTwoPi * var) + d * d / var);
}

/** Test-local central-difference Jacobian. */
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
    const Eigen::VectorXd& x, double rel_step = 1e-6) {
  const Eigen::VectorXd g0 = g(x);
  Eigen::MatrixXd jac(g0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = rel_step * (1.0 + std::abs(x[i]));
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    jac.col(i) = (g(hi) - g(lo)) / (2.0 * step);
  }
  return jac;
}

/** Largest absolute elementwise difference between two matrices/vectors. */
template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/** Scalar random-walk model x' = x + w, y = x + v, handy for hand-checked
 *  cases. */
inline lossfilt::StateSpaceModel scalar_model(double q, double r,
                                              double prior_mean,
                                              double prior_var) {
  lossfilt::StateSpaceModel m;
  m.state_dim = 1;
  m.meas_dim = 1;
  m.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  m.h = [](const Eigen::VectorXd& x) { return x; };
  m.jac_f = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  m.jac_h = [](const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1);
  };
  m.Q = Eigen::MatrixXd::Constant(1, 1, q);
  m.R = Eigen::MatrixXd::Constant(1, 1, r);
  m.initial = lossfilt::GaussianBelief{
      Eigen::VectorXd::Constant(1, prior_mean),
      Eigen::MatrixXd::Constant(1, 1, prior_var)};
  m.linear = true;
  return m;
}

/** Random symmetric positive definite matrix with eigenvalues in
 *  [lo, lo + spread]. */
inline Eigen::MatrixXd random_spd(int n, lossfilt::RngStream& rng,
                                  double lo = 0.5, double spread = 2.0) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.normal();
  Eigen::MatrixXd spd = m * m.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(spd);
  const double scale = spread / std::max(1e-12, es.eigenvalues().maxCoeff());
  return lossfilt::symmetrize(spd * scale +
                              lo * Eigen::MatrixXd::Identity(n, n));
}

inline Eigen::VectorXd random_vector(int n, lossfilt::RngStream& rng) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace testutil
