#include <gtest/gtest.h>

#include <cmath>
#include <optional>

#include "test_util.hpp"

namespace {

using lossfilt::LossProcess;
using lossfilt::RngStream;
using lossfilt::StateSpaceModel;
using lossfilt::TrialRecord;
using lossfilt::build_linear;
using lossfilt::build_tracking;
using lossfilt::linearize;
using lossfilt::loss_prior;
using lossfilt::sample_loss;
using lossfilt::simulate;
using lossfilt::validate_model;

TEST(Linearize, LinearModelGivesConstantsAndZeroOffsets) {
  const auto scenario = build_linear(0.3);
  const StateSpaceModel& m = scenario.model;
  RngStream rng(1);
  const Eigen::VectorXd u = m.zero_control();
  for (int i = 0; i < 10; ++i) {
    const Eigen::VectorXd xf = testutil::random_vector(2, rng);
    const Eigen::VectorXd xp = testutil::random_vector(2, rng);
    const auto lin = linearize(m, xf, xp, u);
    Eigen::MatrixXd a_expected(2, 2);
    a_expected << 0.6, 0.4, 0.1, 0.9;
    Eigen::MatrixXd c_expected(1, 2);
    c_expected << 1.0, -2.0;
    EXPECT_EQ(testutil::max_abs_diff(lin.A, a_expected), 0.0);
    EXPECT_EQ(testutil::max_abs_diff(lin.C, c_expected), 0.0);
    EXPECT_LT(lin.b.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(lin.z.cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Jacobians, FiniteDifferenceFallbackOnQuadraticMap) {
  StateSpaceModel m;
  m.state_dim = 2;
  m.meas_dim = 1;
  m.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    Eigen::VectorXd out(2);
    out << x[0] * x[0], x[0] * x[1];
    return out;
  };
  m.h = [](const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Constant(1, x[0] + 2.0 * x[1]);
  };
  Eigen::VectorXd x(2);
  x << 2.0, -1.0;
  const Eigen::MatrixXd a = m.A(x, m.zero_control());
  Eigen::MatrixXd a_expected(2, 2);
  a_expected << 4.0, 0.0, -1.0, 2.0;
  EXPECT_LT(testutil::max_abs_diff(a, a_expected), 1e-8);
  Eigen::MatrixXd c_expected(1, 2);
  c_expected << 1.0, 2.0;
  EXPECT_LT(testutil::max_abs_diff(m.C(x), c_expected), 1e-8);
}

TEST(Jacobians, AnalyticTrackingJacobiansMatchFiniteDifferences) {
  const auto scenario = build_tracking(0.3);
  const StateSpaceModel& m = scenario.model;
  RngStream rng(2);
  const Eigen::VectorXd u = m.zero_control();
  for (int i = 0; i < 10; ++i) {
    Eigen::VectorXd x = testutil::random_vector(6, rng);
    x[0] += 10.0;
    x[3] += 10.0;
    const Eigen::MatrixXd a_fd = testutil::fd_jacobian(
        [&](const Eigen::VectorXd& xi) { return m.f(xi, u); }, x);
    const Eigen::MatrixXd c_fd = testutil::fd_jacobian(m.h, x);
    const double a_rel = testutil::max_abs_diff(m.A(x, u), a_fd) /
                         (1.0 + a_fd.cwiseAbs().maxCoeff());
    const double c_rel = testutil::max_abs_diff(m.C(x), c_fd) /
                         (1.0 + c_fd.cwiseAbs().maxCoeff());
    EXPECT_LT(a_rel, 1e-4);
    EXPECT_LT(c_rel, 1e-4);
  }
}

TEST(ValidateModel, AcceptsScenariosRejectsBrokenModels) {
  EXPECT_NO_THROW(validate_model(build_linear(0.2).model));
  EXPECT_NO_THROW(validate_model(build_tracking(0.2, true).model));

  StateSpaceModel bad = build_linear(0.2).model;
  bad.Q(0, 1) = 0.5;
  EXPECT_THROW(validate_model(bad), std::invalid_argument);

  bad = build_linear(0.2).model;
  bad.R(0, 0) = -1.0;
  EXPECT_THROW(validate_model(bad), std::invalid_argument);

  bad = build_linear(0.2).model;
  bad.h = nullptr;
  EXPECT_THROW(validate_model(bad), std::invalid_argument);

  bad = build_linear(0.2).model;
  bad.initial.mean = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(validate_model(bad), std::invalid_argument);
}

TEST(LossProcessTest, PriorExamples) {
  const auto bern = LossProcess::bernoulli(0.7);
  EXPECT_EQ(loss_prior(bern, std::nullopt), 0.7);
  EXPECT_EQ(loss_prior(bern, 0), 0.7);
  EXPECT_EQ(loss_prior(bern, 1), 0.7);

  const auto markov = LossProcess::markov(0.2, 0.5, 0.6);
  EXPECT_EQ(loss_prior(markov, std::nullopt), 0.6);
  EXPECT_DOUBLE_EQ(loss_prior(markov, 1), 0.8);
  EXPECT_EQ(loss_prior(markov, 0), 0.5);
  EXPECT_DOUBLE_EQ(markov.stationary_prob(), 0.5 / 0.7);

  EXPECT_THROW(LossProcess::bernoulli(1.5), std::invalid_argument);
  EXPECT_THROW(LossProcess::markov(-0.1, 0.5, 0.5), std::invalid_argument);
}

TEST(LossProcessTest, BernoulliFrequencyWithinThreeSigma) {
  const auto proc = LossProcess::bernoulli(0.7);
  RngStream rng(10);
  const int n = 100000;
  long ones = 0;
  for (int i = 0; i < n; ++i) ones += sample_loss(proc, std::nullopt, rng);
  const double freq = static_cast<double>(ones) / n;
  const double sigma = std::sqrt(0.7 * 0.3 / n);
  EXPECT_NEAR(freq, 0.7, 3.0 * sigma);
}

TEST(LossProcessTest, MarkovStationaryFractionWithinThreeSigma) {
  const double p = 0.2, q = 0.3;
  const auto proc = LossProcess::markov(p, q, 0.5);
  RngStream rng(11);
  const int n = 200000;
  long ones = 0;
  std::optional<int> prev;
  for (int i = 0; i < n; ++i) {
    const int g = sample_loss(proc, prev, rng);
    ones += g;
    prev = g;
  }
  const double freq = static_cast<double>(ones) / n;
  const double pi = q / (p + q);
  const double rho = 1.0 - p - q;
  const double sigma =
      std::sqrt(pi * (1.0 - pi) * (1.0 + rho) / (1.0 - rho) / n);
  EXPECT_NEAR(freq, pi, 3.0 * sigma);
}

TEST(Simulate, DeterministicForFixedSeed) {
  const auto scenario = build_linear(0.3);
  const TrialRecord a = simulate(scenario.model, scenario.loss, {}, 50, 99);
  const TrialRecord b = simulate(scenario.model, scenario.loss, {}, 50, 99);
  ASSERT_EQ(a.states.size(), 50u);
  for (int k = 0; k < 50; ++k) {
    EXPECT_EQ(a.states[k], b.states[k]);
    EXPECT_EQ(a.measurements[k], b.measurements[k]);
    EXPECT_EQ(a.losses[k], b.losses[k]);
  }
}

TEST(Simulate, LossProcessChangeLeavesStateAndNoiseAlone) {
  const auto scenario = build_linear(0.6);
  const auto always_on = LossProcess::bernoulli(1.0);
  const auto markov_on = LossProcess::markov(0.0, 1.0, 1.0);
  const TrialRecord lossy =
      simulate(scenario.model, scenario.loss, {}, 80, 1234);
  const TrialRecord clean =
      simulate(scenario.model, always_on, {}, 80, 1234);
  const TrialRecord clean_markov =
      simulate(scenario.model, markov_on, {}, 80, 1234);

  for (int k = 0; k < 80; ++k) {
    EXPECT_EQ(lossy.states[k], clean.states[k]);
    EXPECT_EQ(clean.states[k], clean_markov.states[k]);
    EXPECT_EQ(clean.measurements[k], clean_markov.measurements[k]);
    EXPECT_EQ(clean.losses[k], 1);
    if (lossy.losses[k] == 1) {
      EXPECT_EQ(lossy.measurements[k], clean.measurements[k]);
    } else {
      const Eigen::VectorXd noise_only =
          clean.measurements[k] - scenario.model.h(clean.states[k]);
      EXPECT_LT(testutil::max_abs_diff(lossy.measurements[k], noise_only),
                1e-12);
    }
  }
}

TEST(Simulate, NoiseFreeRunIsExact) {
  StateSpaceModel m = build_linear(0.0).model;
  m.Q = Eigen::MatrixXd::Zero(2, 2);
  m.R = Eigen::MatrixXd::Zero(1, 1);
  m.initial.cov = Eigen::MatrixXd::Zero(2, 2);
  m.initial.mean << 1.0, -2.0;
  const TrialRecord rec =
      simulate(m, LossProcess::bernoulli(1.0), {}, 20, 5);
  Eigen::VectorXd x = m.initial.mean;
  for (int k = 0; k < 20; ++k) {
    EXPECT_EQ(rec.states[k], x);
    EXPECT_EQ(rec.measurements[k], m.h(x));
    x = m.f(x, m.zero_control());
  }
}

TEST(Simulate, ThetaZeroDeliversPureNoise) {
  StateSpaceModel m = build_linear(0.0).model;
  m.R = Eigen::MatrixXd::Zero(1, 1);
  const TrialRecord rec =
      simulate(m, LossProcess::bernoulli(0.0), {}, 20, 6);
  for (int k = 0; k < 20; ++k) {
    EXPECT_EQ(rec.losses[k], 0);
    EXPECT_EQ(rec.measurements[k][0], 0.0);
  }
}

TEST(Simulate, RecordShapesAndGammaValues) {
  const auto scenario = build_tracking(0.4);
  const TrialRecord rec =
      simulate(scenario.model, scenario.loss, {}, 30, 7);
  ASSERT_EQ(rec.states.size(), 30u);
  ASSERT_EQ(rec.measurements.size(), 30u);
  ASSERT_EQ(rec.losses.size(), 30u);
  ASSERT_EQ(rec.controls.size(), 30u);
  for (int k = 0; k < 30; ++k) {
    EXPECT_EQ(rec.states[k].size(), 6);
    EXPECT_EQ(rec.measurements[k].size(), 2);
    EXPECT_TRUE(rec.losses[k] == 0 || rec.losses[k] == 1);
  }
}

}  // namespace
