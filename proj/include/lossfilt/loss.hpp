#pragma once

#include <optional>
#include <stdexcept>

#include "lossfilt/rng.hpp"

namespace lossfilt {

/** Binary arrival process for the measurement gate gamma_k (1 = received,
 *  0 = lost). Either i.i.d. Bernoulli with P(gamma = 1) = theta, or a
 *  two-state Markov chain with failure rate p = P(0 | prev 1), recovery rate
 *  q = P(1 | prev 0), and initial probability P(gamma_0 = 1). */
struct LossProcess {
  enum class Kind { Bernoulli, Markov };

  Kind kind = Kind::Bernoulli;
  double theta = 1.0;
  double failure_rate = 0.0;
  double recovery_rate = 1.0;
  double initial_prob = 1.0;

  static LossProcess bernoulli(double theta) {
    if (theta < 0.0 || theta > 1.0)
      throw std::invalid_argument("LossProcess: theta outside [0, 1]");
    LossProcess lp;
    lp.kind = Kind::Bernoulli;
    lp.theta = theta;
    return lp;
  }

  static LossProcess markov(double failure_rate, double recovery_rate,
                            double initial_prob) {
    for (double v : {failure_rate, recovery_rate, initial_prob}) {
      if (v < 0.0 || v > 1.0)
        throw std::invalid_argument("LossProcess: probability outside [0, 1]");
    }
    LossProcess lp;
    lp.kind = Kind::Markov;
    lp.failure_rate = failure_rate;
    lp.recovery_rate = recovery_rate;
    lp.initial_prob = initial_prob;
    return lp;
  }

  /** Long-run fraction of received measurements. */
  double stationary_prob() const {
    if (kind == Kind::Bernoulli) return theta;
    const double denom = failure_rate + recovery_rate;
    return denom > 0.0 ? recovery_rate / denom : initial_prob;
  }
};

/** P(gamma_k = 1 | gamma_{k-1}); pass std::nullopt at k = 0 (or for the
 *  memoryless Bernoulli case, where it is ignored). */
inline double loss_prior(const LossProcess& process,
                         std::optional<int> gamma_prev) {
  if (process.kind == LossProcess::Kind::Bernoulli) return process.theta;
  if (!gamma_prev) return process.initial_prob;
  return *gamma_prev == 1 ? 1.0 - process.failure_rate
                          : process.recovery_rate;
}

/** Draw gamma_k given gamma_{k-1} (std::nullopt at k = 0). Consumes exactly
 *  one uniform. */
inline int sample_loss(const LossProcess& process,
                       std::optional<int> gamma_prev, RngStream& rng) {
  return rng.bernoulli(loss_prior(process, gamma_prev));
}

}  // namespace lossfilt
