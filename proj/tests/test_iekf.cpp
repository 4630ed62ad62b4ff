#include <gtest/gtest.h>

#include "test_util.hpp"

namespace {

using lossfilt::GaussianBelief;
using lossfilt::IekfState;
using lossfilt::LossProcess;
using lossfilt::StateSpaceModel;
using lossfilt::StepDiagnostics;
using lossfilt::TrialRecord;
using lossfilt::bkf1_init;
using lossfilt::bkf1_step;
using lossfilt::bkf2_init;
using lossfilt::bkf2_step;
using lossfilt::build_linear;
using lossfilt::ekf_time_update;
using lossfilt::filter_divergence;
using lossfilt::iekf_init;
using lossfilt::iekf_step;
using lossfilt::rbpf_init;
using lossfilt::rbpf_step;
using lossfilt::simulate;

TEST(Iekf, MatchesTextbookKalmanFilterOverFiftySteps) {
  const auto scenario = build_linear(0.0);
  const StateSpaceModel& m = scenario.model;
  const TrialRecord rec =
      simulate(m, LossProcess::bernoulli(1.0), {}, 50, 321);

  IekfState st = iekf_init(m);
  testutil::TextbookKf ref{m.initial.mean, m.initial.cov};
  Eigen::MatrixXd a(2, 2), c(1, 2);
  a << 0.6, 0.4, 0.1, 0.9;
  c << 1.0, -2.0;

  const Eigen::VectorXd u = m.zero_control();
  for (int k = 0; k < 50; ++k) {
    st = iekf_step(st, m, rec.measurements[k], 1, u);
    ref.update(c, m.R, rec.measurements[k]);
    EXPECT_LT(testutil::max_abs_diff(st.filt.mean, ref.x), 1e-10);
    EXPECT_LT(testutil::max_abs_diff(st.filt.cov, ref.P), 1e-10);
    ref.predict(a, m.Q);
    EXPECT_LT(testutil::max_abs_diff(st.pred.mean, ref.x), 1e-10);
    EXPECT_LT(testutil::max_abs_diff(st.pred.cov, ref.P), 1e-10);
  }
}

TEST(Iekf, ScalarHandComputedStep) {
  const StateSpaceModel m = testutil::scalar_model(0.0, 1.0, 0.0, 1.0);
  IekfState st = iekf_init(m);
  st = iekf_step(st, m, Eigen::VectorXd::Constant(1, 2.0), 1,
                 m.zero_control());
  EXPECT_DOUBLE_EQ(st.filt.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(st.filt.cov(0, 0), 0.5);
}

TEST(Iekf, LostMeasurementPassesPredictionThrough) {
  const auto scenario = build_linear(0.0);
  const StateSpaceModel& m = scenario.model;
  IekfState st = iekf_init(m);
  StepDiagnostics diag;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 123.0);
  st = iekf_step(st, m, y, 0, m.zero_control(), &diag);
  EXPECT_EQ(st.filt.mean, m.initial.mean);
  EXPECT_EQ(st.filt.cov, m.initial.cov);
  EXPECT_EQ(diag.gamma_hat, 0);
  EXPECT_EQ(diag.pdf_evals, 0);

  Eigen::MatrixXd a(2, 2);
  a << 0.6, 0.4, 0.1, 0.9;
  const Eigen::MatrixXd expected_cov =
      a * m.initial.cov * a.transpose() + m.Q;
  EXPECT_LT(testutil::max_abs_diff(st.pred.cov, expected_cov), 1e-14);
}

TEST(Iekf, JosephFormAgreesWithStandardUpdate) {
  lossfilt::RngStream rng(17);
  const auto scenario = build_linear(0.0);
  const StateSpaceModel& m = scenario.model;
  for (int i = 0; i < 10; ++i) {
    GaussianBelief pred{testutil::random_vector(2, rng),
                        testutil::random_spd(2, rng)};
    const Eigen::VectorXd y = testutil::random_vector(1, rng);
    const GaussianBelief plain =
        lossfilt::gated_measurement_update(pred, m, y, 1, false);
    const GaussianBelief joseph =
        lossfilt::gated_measurement_update(pred, m, y, 1, true);
    EXPECT_EQ(plain.mean, joseph.mean);
    EXPECT_LT(testutil::max_abs_diff(plain.cov, joseph.cov), 1e-12);
    EXPECT_TRUE(lossfilt::valid_belief(joseph));
  }
}

TEST(Filters, IdenticalTimeUpdateAcrossAllFilters) {
  const auto scenario = build_linear(0.0);
  const StateSpaceModel& m = scenario.model;
  lossfilt::RngStream rng(23);
  const GaussianBelief b{testutil::random_vector(2, rng),
                         testutil::random_spd(2, rng)};
  const Eigen::VectorXd u = m.zero_control();
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, 0.4);
  const GaussianBelief expected = ekf_time_update(b, m, u);
  const auto off = LossProcess::bernoulli(0.0);

  IekfState iekf{b, b};
  iekf = iekf_step(iekf, m, y, 0, u);
  EXPECT_EQ(iekf.pred.mean, expected.mean);
  EXPECT_EQ(iekf.pred.cov, expected.cov);

  lossfilt::Bkf1State bkf1{b, b, std::nullopt};
  bkf1 = bkf1_step(bkf1, m, off, y, u);
  EXPECT_EQ(bkf1.pred.mean, expected.mean);
  EXPECT_EQ(bkf1.pred.cov, expected.cov);

  lossfilt::Bkf2State bkf2{b, b, 0.0};
  bkf2 = bkf2_step(bkf2, m, off, y, u);
  EXPECT_EQ(bkf2.pred.mean, expected.mean);
  EXPECT_EQ(bkf2.pred.cov, expected.cov);

  lossfilt::RbpfState pf = rbpf_init(m, off, 1, 7);
  pf.particles[0].pred = b;
  auto out = rbpf_step(std::move(pf), m, off, y, u);
  EXPECT_EQ(out.state.particles[0].pred.mean, expected.mean);
  EXPECT_EQ(out.state.particles[0].pred.cov, expected.cov);
  EXPECT_EQ(out.estimate.mean, b.mean);
}

TEST(Iekf, SingularInnovationCovarianceSignalsDivergence) {
  StateSpaceModel m = testutil::scalar_model(0.0, 0.0, 0.0, 0.0);
  IekfState st = iekf_init(m);
  EXPECT_THROW(
      iekf_step(st, m, Eigen::VectorXd::Constant(1, 1.0), 1,
                m.zero_control()),
      filter_divergence);
}

}  // namespace
