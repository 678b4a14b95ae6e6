#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "secl/harness/experiment.hpp"
#include "secl/rate.hpp"

namespace {

using secl::Matrix;
using secl::SpdMatrix;
using secl::Vector;

oracle::Plant plant_of(const secl::LinearGaussianModel& m, const secl::TriggerConfig& cfg) {
  return oracle::Plant{m.A, m.C, m.Q, m.R, cfg.sigma, cfg.threshold};
}

// Estimator states along one Case-n trajectory, indexed by k.
std::vector<secl::EstimatorState> states_along(const secl::LinearGaussianModel& m, const secl::TriggerConfig& cfg,
                                               int steps, std::uint64_t seed) {
  secl::Rng sim(seed);
  const secl::Trajectory t = secl::simulate(m, steps, sim, secl::tracking_true_initial_state());
  secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
  std::vector<secl::EstimatorState> out{init.state};
  for (int k = 1; k <= steps; ++k) {
    secl::step(init.state, m, cfg, t.measurements[k]);
    out.push_back(init.state);
  }
  return out;
}

TEST(RateOneStep, MatchedBoundGivesAlpha) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const Matrix M = m.x0_cov + Matrix::Identity(3, 3);
  const Matrix S = m.C * M * m.C.transpose() + m.R;
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(S));
  const secl::EstimatorCache cache = secl::make_cache(m, cfg, M);
  const secl::RatePrediction r = secl::rate_one_step(cache);
  EXPECT_NEAR(r.prob0, 0.95, 1e-7);
  EXPECT_NEAR(r.gamma_hat, 0.05, 1e-7);
  EXPECT_EQ(r.gamma_hat, 1.0 - r.prob0);
  EXPECT_EQ(r.which, secl::RateHorizon::one_step);
}

TEST(RateOneStep, ThresholdLimits) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const Matrix M = m.x0_cov;
  EXPECT_EQ(secl::rate_one_step(secl::make_cache(m, cfg.with_threshold(0.0), M)).gamma_hat, 1.0);
  EXPECT_EQ(secl::rate_one_step(secl::make_cache(m, cfg.with_threshold(std::numeric_limits<double>::infinity()), M))
                .gamma_hat,
            0.0);
}

TEST(RateOneStep, MatchesSimulatedSilenceFrequency) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  std::mt19937_64 rng(500);
  for (int c = 1; c <= 3; ++c) {
    const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(c)));
    const auto states = states_along(m, cfg, 40, 600 + c);
    for (int k : {1, 7, 25, 39}) {
      const secl::EstimatorState& st = states[k];
      const Matrix M = m.A * st.P * m.A.transpose() + m.Q;
      const double predicted = secl::make_cache(m, cfg, M).prob0;
      const double freq = oracle::one_step_silence_frequency(plant_of(m, cfg), st.xhat, st.P, 100000, rng);
      EXPECT_NEAR(predicted, freq, 0.01) << "case " << c << " k " << k;
    }
  }
}

TEST(RateTwoStep, EndpointsOfTheMixture) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const auto states = states_along(m, cfg, 10, 3);
  const secl::EstimatorCache& cache = states[5].cache;
  const double sent = secl::detail::silent_probability_from_state_cov(m, cfg, cache.P_z, 1e-10);
  const double silent =
      secl::detail::silent_probability_from_state_cov(m, cfg, cache.silent_covariance(), 1e-10);
  EXPECT_GT(sent, silent);
  EXPECT_NEAR(secl::rate_two_step({0.0, cache}, m, cfg).prob0, sent, 1e-8);
  EXPECT_NEAR(secl::rate_two_step({1.0, cache}, m, cfg).prob0, silent, 1e-8);
  const double mid = secl::rate_two_step({0.3, cache}, m, cfg).prob0;
  EXPECT_NEAR(mid, 0.7 * sent + 0.3 * silent, 1e-8);
  EXPECT_EQ(secl::rate_two_step({0.3, cache}, m, cfg).which, secl::RateHorizon::two_step);
  EXPECT_THROW(secl::rate_two_step({1.5, cache}, m, cfg), std::domain_error);
}

TEST(RateTwoStep, NoTruncationCollapsesToOneMixtureComponent) {
  // Never transmitting: the silent branch keeps the full prediction and the
  // two-step prediction reduces to the one-step one for k-1 -> k.
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig base = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const secl::TriggerConfig never = base.with_threshold(std::numeric_limits<double>::infinity());
  const Matrix M = m.x0_cov + Matrix::Identity(3, 3);
  const secl::EstimatorCache c = secl::make_cache(m, never, M);
  EXPECT_LT((c.silent_covariance() - M).cwiseAbs().maxCoeff(), 1e-8 * M.norm());
  EXPECT_EQ(secl::rate_two_step({1.0, c}, m, never).gamma_hat, 0.0);
}

TEST(RateTwoStep, MatchesNestedSimulation) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  std::mt19937_64 rng(700);
  for (int c = 1; c <= 3; ++c) {
    const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(c)));
    const auto states = states_along(m, cfg, 40, 800 + c);
    for (int k : {3, 12, 30}) {
      const secl::EstimatorState& base = states[k - 2];
      const Matrix M1 = m.A * base.P * m.A.transpose() + m.Q;
      const secl::EstimatorCache cache_prev = secl::make_cache(m, cfg, M1);
      const double predicted = secl::rate_two_step(secl::RateState::from_cache(cache_prev), m, cfg).prob0;
      const double freq = oracle::two_step_silence_frequency(plant_of(m, cfg), base.xhat, base.P, 100000, rng);
      EXPECT_NEAR(predicted, freq, 0.02) << "case " << c << " k " << k;
    }
  }
}

TEST(Bootstrap, MatchedPriorGivesAlpha) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const Matrix S0 = m.C * m.x0_cov * m.C.transpose() + m.R;
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(S0));
  const secl::BootstrapRates b = secl::bootstrap_rates(m, cfg);
  EXPECT_NEAR(b.E_gamma0, 0.05, 1e-7);
  EXPECT_GT(b.E_gamma1, 0.0);
  EXPECT_LT(b.E_gamma1, 1.0);
}

TEST(Bootstrap, MatchesPriorDrawnTrials) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(1)));
  const secl::BootstrapRates b = secl::bootstrap_rates(m, cfg);
  const int trials = 5000;
  double g0 = 0.0;
  double g1 = 0.0;
  for (int i = 0; i < trials; ++i) {
    secl::Rng sim(secl::derive_seed(31337, i));
    const secl::Trajectory t = secl::simulate(m, 1, sim);
    secl::InitResult init = secl::initialize(m, cfg, t.measurements[0]);
    g0 += init.output.gamma;
    g1 += secl::step(init.state, m, cfg, t.measurements[1]).gamma;
  }
  EXPECT_NEAR(b.E_gamma0, g0 / trials, 0.02);
  EXPECT_NEAR(b.E_gamma1, g1 / trials, 0.02);
}

TEST(RatesAlong, TraceShapeAndBootstrapSteps) {
  const secl::LinearGaussianModel m = secl::tracking_preset();
  const secl::TriggerConfig cfg = secl::make_config(SpdMatrix(secl::case_nbar(2)));
  secl::Rng sim(1);
  const secl::Trajectory t = secl::simulate(m, 20, sim, secl::tracking_true_initial_state());
  const secl::RateTrace trace = secl::rates_along(m, cfg, t.measurements);
  const secl::BootstrapRates b = secl::bootstrap_rates(m, cfg);
  ASSERT_EQ(trace.gamma.size(), 21u);
  ASSERT_EQ(trace.alg1.size(), 21u);
  ASSERT_EQ(trace.alg2.size(), 21u);
  EXPECT_EQ(trace.alg1[0], b.E_gamma0);
  EXPECT_EQ(trace.alg2[0], b.E_gamma0);
  EXPECT_EQ(trace.alg2[1], b.E_gamma1);
  for (std::size_t k = 0; k < trace.alg1.size(); ++k) {
    EXPECT_GE(trace.alg1[k], 0.0);
    EXPECT_LE(trace.alg1[k], 1.0);
    EXPECT_GE(trace.alg2[k], 0.0);
    EXPECT_LE(trace.alg2[k], 1.0);
  }
  EXPECT_THROW(secl::rates_along(m, cfg, {}), std::invalid_argument);
}

}  // namespace
