#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "secl/estimator.hpp"
#include "secl/harness/experiment.hpp"

namespace {

using secl::Matrix;
using secl::SpdMatrix;
using secl::Vector;

constexpr double kInf = std::numeric_limits<double>::infinity();

secl::LinearGaussianModel random_model(int n, int p, std::mt19937_64& rng) {
  secl::LinearGaussianModel m;
  m.A = oracle::random_gaussian(n, n, rng);
  const double radius = Eigen::EigenSolver<Matrix>(m.A).eigenvalues().cwiseAbs().maxCoeff();
  m.A *= 0.98 / std::max(radius, 1e-3);
  m.C = oracle::random_gaussian(p, n, rng);
  m.Q = oracle::random_spd(n, rng, 0.1, 2.0);
  m.R = oracle::random_spd(p, rng, 0.1, 2.0);
  m.x0_mean = oracle::random_gaussian(n, 1, rng);
  m.x0_cov = oracle::random_spd(n, rng, 0.5, 3.0);
  return m;
}

double rel_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(1.0, b.cwiseAbs().maxCoeff());
}

TEST(Estimator, PredictionStep) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  secl::EstimatorState st;
  st.xhat = Eigen::Vector3d(1.0, 2.0, 3.0);
  st.P = Matrix::Identity(3, 3);
  const secl::Prediction pred = secl::predict(st, m);
  EXPECT_EQ(pred.xpred, m.A * st.xhat);
  EXPECT_LT((pred.M - (m.A * m.A.transpose() + m.Q)).norm(), 1e-12);
  EXPECT_EQ(pred.ypred, m.C * pred.xpred);
}

TEST(Estimator, AlwaysTransmitIsTheKalmanFilter) {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 4;
    const int p = 1 + (trial / 4) % std::min(n, 3);
    const secl::LinearGaussianModel m = random_model(n, p, rng);
    const secl::TriggerConfig cfg =
        secl::make_config(SpdMatrix(oracle::random_spd(p, rng))).with_threshold(0.0);
    secl::Rng sim(trial);
    const secl::Trajectory t = secl::simulate(m, 40, sim);

    oracle::KalmanReference kf{m.x0_mean, m.x0_cov};
    kf.correct(m.C, m.R, t.measurements[0]);
    secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
    EXPECT_TRUE(init.output.gamma);
    EXPECT_LE(rel_diff(init.state.xhat, kf.x), 1e-10);
    EXPECT_LE(rel_diff(init.state.P, kf.P), 1e-10);
    for (int k = 1; k <= 40; ++k) {
      const secl::StepOutput out = secl::step(init.state, m, cfg, t.measurements[k]);
      kf.predict(m.A, m.Q);
      kf.correct(m.C, m.R, t.measurements[k]);
      ASSERT_TRUE(out.gamma);
      ASSERT_LE(rel_diff(out.xhat, kf.x), 1e-10) << "trial " << trial << " k " << k;
      ASSERT_LE(rel_diff(out.P, kf.P), 1e-10) << "trial " << trial << " k " << k;
    }
    EXPECT_EQ(init.state.k, 40);
  }
}

TEST(Estimator, NeverTransmitIsOpenLoopPrediction) {
  std::mt19937_64 rng(102);
  const secl::LinearGaussianModel m = random_model(3, 2, rng);
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(oracle::random_spd(2, rng))).with_threshold(kInf);
  secl::Rng sim(5);
  const secl::Trajectory t = secl::simulate(m, 30, sim);
  secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
  Vector x = m.x0_mean;
  Matrix P = m.x0_cov;
  EXPECT_FALSE(init.output.gamma);
  EXPECT_EQ(init.state.xhat, x);
  EXPECT_LE(rel_diff(init.state.P, P), 1e-10);
  for (int k = 1; k <= 30; ++k) {
    const secl::StepOutput out = secl::step(init.state, m, cfg, t.measurements[k]);
    x = m.A * x;
    P = m.A * P * m.A.transpose() + m.Q;
    ASSERT_FALSE(out.gamma);
    ASSERT_LE(rel_diff(out.xhat, x), 1e-12);
    ASSERT_LE(rel_diff(out.P, P), 1e-10);
  }
}

TEST(Estimator, SilentStepKeepsThePredictedMean) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  secl::EstimatorState st;
  st.xhat = Eigen::Vector3d(3500.0, 40.0, 0.5);
  st.P = m.x0_cov + Matrix::Identity(3, 3);
  const secl::Prediction pred = secl::predict(st, m);
  const secl::StepOutput out = secl::update(st, m, cfg, pred, pred.ypred);
  EXPECT_FALSE(out.gamma);
  EXPECT_EQ(out.phi_stat, 0.0);
  EXPECT_EQ(out.xhat, pred.xpred);
}

TEST(Estimator, ScalarSilentCovarianceMatchesSimpsonOracle) {
  secl::LinearGaussianModel m;
  m.A = Matrix::Constant(1, 1, 0.95);
  m.C = Matrix::Constant(1, 1, 1.0);
  m.Q = Matrix::Constant(1, 1, 0.4);
  m.R = Matrix::Constant(1, 1, 0.3);
  m.x0_mean = Vector::Zero(1);
  m.x0_cov = Matrix::Constant(1, 1, 2.0);
  for (double nbar : {0.5, 1.5, 6.0}) {
    const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(Matrix::Constant(1, 1, nbar)));
    secl::EstimatorState st;
    st.xhat = Vector::Zero(1);
    st.P = Matrix::Constant(1, 1, 0.7);
    const secl::Prediction pred = secl::predict(st, m);
    const secl::StepOutput out = secl::update(st, m, cfg, pred, pred.ypred);
    ASSERT_FALSE(out.gamma);

    const double M = 0.95 * 0.95 * 0.7 + 0.4;
    const double S = M + 0.3;
    const double Nz = S / nbar;
    const double r = std::sqrt(3.841458820694124);
    const oracle::Interval1d z = oracle::scalar_interval_moments(Nz, r);
    const double K = M / S * std::sqrt(nbar);
    const double expected = M - M * M / S + K * K * z.cond_second;
    EXPECT_NEAR(out.P(0, 0), expected, 1e-8 * expected) << "nbar " << nbar;
    EXPECT_NEAR(st.cache.prob0, z.prob, 1e-9);
  }
}

TEST(Estimator, CovarianceSandwichedBetweenPosteriorAndPrediction) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  for (int c = 1; c <= 3; ++c) {
    const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(c)));
    secl::Rng sim(c);
    const secl::Trajectory t = secl::simulate(m, 100, sim, secl::tracking_true_initial_state());
    secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
    for (int k = 1; k <= 100; ++k) {
      const secl::Prediction pred = secl::predict(init.state, m);
      const secl::StepOutput out = secl::step(init.state, m, cfg, t.measurements[k]);
      const Matrix& P_z = init.state.cache.P_z;
      const double scale = pred.M.norm();
      ASSERT_TRUE(secl::is_psd(out.P, 1e-9));
      ASSERT_TRUE(secl::is_psd(pred.M - out.P, 1e-9)) << "case " << c << " k " << k;
      ASSERT_TRUE(secl::is_psd(out.P - P_z, 1e-9)) << "case " << c << " k " << k;
      ASSERT_LT((out.P - out.P.transpose()).norm(), 1e-12 * scale);
    }
  }
}

TEST(Estimator, JosephAndStandardFormsAgree) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  secl::Rng sim(9);
  const secl::Trajectory t = secl::simulate(m, 100, sim, secl::tracking_true_initial_state());
  secl::InitResult a = secl::initialize(m, cfg, t.measurements[0], {true});
  secl::InitResult b = secl::initialize(m, cfg, t.measurements[0], {false});
  for (int k = 1; k <= 100; ++k) {
    const secl::StepOutput oa = secl::step(a.state, m, cfg, t.measurements[k], {true});
    const secl::StepOutput ob = secl::step(b.state, m, cfg, t.measurements[k], {false});
    ASSERT_EQ(oa.gamma, ob.gamma);
    ASSERT_LE(rel_diff(oa.P, ob.P), 1e-9);
  }
}

TEST(Estimator, RotatedFactorInvariance) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  std::mt19937_64 rng(77);
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const secl::TriggerConfig rotated = cfg.with_rotated_factor(oracle::random_orthogonal(2, rng));
  secl::Rng sim(10);
  const secl::Trajectory t = secl::simulate(m, 100, sim, secl::tracking_true_initial_state());
  secl::InitResult a = secl::initialize(m, cfg, t.measurements[0]);
  secl::InitResult b = secl::initialize(m, rotated, t.measurements[0]);
  EXPECT_EQ(a.output.gamma, b.output.gamma);
  for (int k = 1; k <= 100; ++k) {
    const secl::StepOutput oa = secl::step(a.state, m, cfg, t.measurements[k]);
    const secl::StepOutput ob = secl::step(b.state, m, rotated, t.measurements[k]);
    ASSERT_EQ(oa.gamma, ob.gamma);
    ASSERT_LE((oa.P - ob.P).cwiseAbs().maxCoeff(), 1e-9);
    ASSERT_LE((oa.xhat - ob.xhat).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Estimator, DroppedMeanShiftIsNegligible) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(3)));
  secl::Rng sim(12);
  const secl::Trajectory t = secl::simulate(m, 100, sim, secl::tracking_true_initial_state());
  secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
  for (int k = 1; k <= 100; ++k) {
    const secl::StepOutput out = secl::step(init.state, m, cfg, t.measurements[k]);
    ASSERT_LE(init.state.cache.psi.cwiseAbs().maxCoeff(), 1e-7);
    ASSERT_LE(out.first_moment_diag.cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Estimator, InitializationUsesThePriorAsPrediction) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const secl::InitResult quiet = secl::initialize(m, cfg, m.C * m.x0_mean);
  EXPECT_FALSE(quiet.output.gamma);
  EXPECT_EQ(quiet.state.xhat, m.x0_mean);
  EXPECT_EQ(quiet.state.k, 0);

  const Vector y0 = Eigen::Vector2d(3400.0, 1.0);
  const secl::InitResult loud = secl::initialize(m, cfg, y0);
  EXPECT_TRUE(loud.output.gamma);
  oracle::KalmanReference kf{m.x0_mean, m.x0_cov};
  kf.correct(m.C, m.R, y0);
  EXPECT_LE(rel_diff(loud.state.xhat, kf.x), 1e-12);
  EXPECT_LE(rel_diff(loud.state.P, kf.P), 1e-10);
}

TEST(Estimator, ErrorCovarianceIsConsistent) {
  // Trial-averaged squared error should match the trial-averaged trace of P.
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const int trials = 2000;
  const int k_check = 50;
  double mse = 0.0;
  double trace = 0.0;
  for (int i = 0; i < trials; ++i) {
    secl::Rng sim(secl::derive_seed(4242, i));
    const secl::Trajectory t = secl::simulate(m, k_check, sim);
    secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
    secl::StepOutput out = init.output;
    for (int k = 1; k <= k_check; ++k) out = secl::step(init.state, m, cfg, t.measurements[k]);
    mse += (t.states[k_check] - out.xhat).squaredNorm();
    trace += out.P.trace();
  }
  EXPECT_NEAR(mse / trace, 1.0, 0.15);
}

TEST(Estimator, SilentStepWithoutMassFails) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1))).with_threshold(0.0);
  secl::EstimatorState st;
  st.xhat = m.x0_mean;
  st.P = m.x0_cov;
  const secl::Prediction pred = secl::predict(st, m);
  secl::EstimatorCache cache = secl::make_cache(m, cfg, pred.M);
  EXPECT_EQ(cache.h, 0.0);
  EXPECT_THROW(secl::apply_decision(st, pred, cache, false, Vector::Zero(2)), secl::DegenerateTrigger);
  EXPECT_NO_THROW(secl::apply_decision(st, pred, cache, true, Vector::Zero(2)));
}

TEST(Estimator, MeasurementDimensionChecked) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  EXPECT_THROW(secl::initialize(m, cfg, Vector::Zero(3)), std::invalid_argument);
  const secl::TriggerConfig scalar = secl::make_config(SpdMatrix(Matrix::Identity(1, 1)));
  EXPECT_THROW(secl::initialize(m, scalar, Vector::Zero(2)), std::invalid_argument);
}

}  // namespace
