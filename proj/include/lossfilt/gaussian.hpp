#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lossfilt {

/** Mean and covariance of a Gaussian state estimate. */
struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

/** Thrown when a covariance stops being usable (indefinite innovation
 *  covariance, failed factorization after jitter). Harness code catches it
 *  per trial; everything else lets it propagate. */
class filter_divergence : public std::runtime_error {
 public:
  filter_divergence(const std::string& what, Eigen::MatrixXd cov)
      : std::runtime_error(what), cov_(std::move(cov)) {}
  const Eigen::MatrixXd& covariance() const { return cov_; }

 private:
  Eigen::MatrixXd cov_;
};

/** (A + A^T) / 2. */
inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& a) {
  return 0.5 * (a + a.transpose());
}

/** Cholesky factorization of a symmetric positive definite matrix.
 *  If the plain factorization fails, retries once with
 *  1e-12 * trace(m)/n * I added; a second failure throws filter_divergence. */
inline Eigen::LLT<Eigen::MatrixXd> chol_spd(const Eigen::MatrixXd& m,
                                            const char* context) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success &&
      llt.matrixLLT().diagonal().minCoeff() > 0.0) {
    return llt;
  }
  const double jitter = 1e-12 * m.trace() / static_cast<double>(m.rows());
  llt.compute(m + jitter * Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  if (llt.info() == Eigen::Success &&
      llt.matrixLLT().diagonal().minCoeff() > 0.0) {
    return llt;
  }
  throw filter_divergence(std::string(context) +
                              ": covariance is not positive definite",
                          m);
}

/** Log density of N(mean, cov) at x, via triangular factorization. */
inline double log_gaussian_pdf(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& mean,
                               const Eigen::MatrixXd& cov) {
  const auto llt = chol_spd(cov, "log_gaussian_pdf");
  const Eigen::VectorXd r = x - mean;
  const double quad = llt.matrixL().solve(r).squaredNorm();
  const double log_det = 2.0 * llt.matrixLLT()
                                   .diagonal()
                                   .array()
                                   .log()
                                   .sum();
  constexpr double kLog2Pi = 1.8378770664093454836;
  return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det + quad);
}

/** Log density of a zero-mean Gaussian at residual r. */
inline double log_gaussian_pdf(const Eigen::VectorXd& r,
                               const Eigen::MatrixXd& cov) {
  return log_gaussian_pdf(r, Eigen::VectorXd::Zero(r.size()), cov);
}

/** Checks the belief contract: square symmetric covariance (within
 *  1e-9 * (1 + max|cov|)) that factorizes after an absolute 1e-12 jitter. */
inline bool valid_belief(const GaussianBelief& b) {
  const auto n = b.mean.size();
  if (b.cov.rows() != n || b.cov.cols() != n) return false;
  const double scale = 1.0 + b.cov.cwiseAbs().maxCoeff();
  if ((b.cov - b.cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    return false;
  Eigen::LLT<Eigen::MatrixXd> llt(
      b.cov + 1e-12 * Eigen::MatrixXd::Identity(n, n));
  return llt.info() == Eigen::Success;
}

}  // namespace lossfilt
