#pragma once

#include <cstdint>
#include <vector>

#include "lossfilt/loss.hpp"
#include "lossfilt/model.hpp"
#include "lossfilt/rng.hpp"

namespace lossfilt {

/** One simulated trajectory: true states, arrival indicators, measurements,
 *  and the controls that were applied. y_k = gamma_k * h(x_k) + v_k, so a
 *  lost measurement still delivers a pure-noise sample. */
struct TrialRecord {
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::VectorXd> measurements;
  std::vector<int> losses;
  std::vector<Eigen::VectorXd> controls;
};

namespace stream_tag {
constexpr std::uint64_t kProcess = 1;
constexpr std::uint64_t kMeasurement = 2;
constexpr std::uint64_t kLoss = 3;
constexpr std::uint64_t kFilter = 4;
}  // namespace stream_tag

/** Simulate `horizon` steps. Three sub-streams (process noise incl. x_0,
 *  measurement noise, loss draws) are derived from `seed` with fixed tags, so
 *  swapping the loss process never perturbs the state or noise sequences.
 *  `controls` may be empty (autonomous); otherwise one u_k per step. */
inline TrialRecord simulate(const StateSpaceModel& model,
                            const LossProcess& loss,
                            const std::vector<Eigen::VectorXd>& controls,
                            int horizon, std::uint64_t seed) {
  RngStream process_rng(mix_seed(seed, stream_tag::kProcess));
  RngStream meas_rng(mix_seed(seed, stream_tag::kMeasurement));
  RngStream loss_rng(mix_seed(seed, stream_tag::kLoss));

  const Eigen::VectorXd u0 = model.zero_control();
  TrialRecord rec;
  rec.states.reserve(horizon);
  rec.measurements.reserve(horizon);
  rec.losses.reserve(horizon);
  rec.controls.reserve(horizon);

  Eigen::VectorXd x = sample_gaussian(model.simulation_initial(), process_rng);
  std::optional<int> gamma_prev;
  for (int k = 0; k < horizon; ++k) {
    const Eigen::VectorXd& u =
        controls.empty() ? u0 : controls[static_cast<std::size_t>(k)];
    const int gamma = sample_loss(loss, gamma_prev, loss_rng);
    gamma_prev = gamma;

    Eigen::VectorXd v = sample_gaussian(
        Eigen::VectorXd::Zero(model.meas_dim), model.R, meas_rng);
    Eigen::VectorXd y = v;
    if (gamma == 1) y += model.h(x);

    rec.states.push_back(x);
    rec.measurements.push_back(std::move(y));
    rec.losses.push_back(gamma);
    rec.controls.push_back(u);

    if (k + 1 < horizon) {
      Eigen::VectorXd w = sample_gaussian(
          Eigen::VectorXd::Zero(model.state_dim), model.Q, process_rng);
      x = model.f(x, u) + w;
    }
  }
  return rec;
}

}  // namespace lossfilt
