#pragma once

#include <stdexcept>
#include <vector>

#include "secl/estimator.hpp"
#include "secl/model.hpp"
#include "secl/trigger.hpp"

namespace secl {

enum class RateHorizon { one_step, two_step };

/// Predicted transmission probability given information up to k-1 or k-2.
struct RatePrediction {
  double gamma_hat = 0.0;
  double prob0 = 0.0;
  RateHorizon which = RateHorizon::one_step;
};

/// What the two-step predictor needs from step k-1: the estimator cache and
/// the one-step silence probability P(gamma_{k-1} = 0 | I_{k-2}).
struct RateState {
  double prob0_prev = 0.0;
  EstimatorCache cache_prev;

  static RateState from_cache(const EstimatorCache& cache) { return RateState{cache.prob0, cache}; }
};

inline RatePrediction make_prediction(double prob0, RateHorizon which) {
  return RatePrediction{1.0 - prob0, prob0, which};
}

/// E[gamma_k | I_{k-1}] from the cache of step k.
inline RatePrediction rate_one_step(const EstimatorCache& cache) {
  return make_prediction(cache.prob0, RateHorizon::one_step);
}

namespace detail {

inline double silent_probability_from_state_cov(const LinearGaussianModel& model, const TriggerConfig& cfg,
                                                const Matrix& P_prev, double tol) {
  const Matrix M = symmetrize(model.A * P_prev * model.A.transpose() + model.Q);
  const Matrix N = symmetrize(cfg.phi * (model.C * M * model.C.transpose() + model.R) * cfg.phi.transpose());
  return ball_probability(SpdMatrix(N, "two-step innovation covariance"), cfg.threshold, tol);
}

}  // namespace detail

/// E[gamma_k | I_{k-2}].
///
/// The silence probability mixes two Gaussian predictions of z_k: one where
/// y_{k-1} was transmitted (state covariance P_z) and one where step k-1 was
/// silent (P_z plus the truncation correction), weighted by the one-step
/// silence probability of step k-1.
inline RatePrediction rate_two_step(const RateState& rs, const LinearGaussianModel& model, const TriggerConfig& cfg,
                                    const EstimatorOptions& opts = {}) {
  if (!(rs.prob0_prev >= 0.0 && rs.prob0_prev <= 1.0)) {
    throw std::domain_error("rate_two_step: prob0_prev must be a probability");
  }
  const EstimatorCache& c = rs.cache_prev;
  const double sent = detail::silent_probability_from_state_cov(model, cfg, c.P_z, opts.quad_tol);
  double silent = sent;
  if (rs.prob0_prev > 0.0) {
    silent = detail::silent_probability_from_state_cov(model, cfg, c.silent_covariance(), opts.quad_tol);
  }
  const double prob0 = sent + rs.prob0_prev * (silent - sent);
  return make_prediction(prob0, RateHorizon::two_step);
}

struct BootstrapRates {
  double E_gamma0 = 0.0;
  double E_gamma1 = 0.0;
};

/// E[gamma_0] and E[gamma_1] from the prior alone; both predictors need them
/// before their recursions have enough history.
inline BootstrapRates bootstrap_rates(const LinearGaussianModel& model, const TriggerConfig& cfg,
                                      const EstimatorOptions& opts = {}) {
  model.validate();
  const EstimatorCache c0 = make_cache(model, cfg, symmetrize(model.x0_cov), opts);
  const RatePrediction r1 = rate_two_step(RateState::from_cache(c0), model, cfg, opts);
  return BootstrapRates{1.0 - c0.prob0, r1.gamma_hat};
}

struct RateTrace {
  std::vector<int> gamma;
  std::vector<double> alg1;  // one-step prediction of E[gamma_k]
  std::vector<double> alg2;  // two-step prediction of E[gamma_k]
};

/// Runs the estimator over one measurement sequence and records both rate
/// predictions at every step. Steps 0 and 1 come from the prior bootstrap.
inline RateTrace rates_along(const LinearGaussianModel& model, const TriggerConfig& cfg,
                             const std::vector<Vector>& measurements, const EstimatorOptions& opts = {}) {
  if (measurements.empty()) throw std::invalid_argument("rates_along: no measurements");
  const BootstrapRates boot = bootstrap_rates(model, cfg, opts);
  RateTrace trace;
  const auto steps = measurements.size();
  trace.gamma.reserve(steps);
  trace.alg1.reserve(steps);
  trace.alg2.reserve(steps);

  InitResult init = initialize(model, cfg, measurements[0], opts);
  EstimatorState& state = init.state;
  trace.gamma.push_back(init.output.gamma ? 1 : 0);
  trace.alg1.push_back(boot.E_gamma0);
  trace.alg2.push_back(boot.E_gamma0);
  for (std::size_t k = 1; k < steps; ++k) {
    const RateState previous = RateState::from_cache(state.cache);
    const StepOutput out = step(state, model, cfg, measurements[k], opts);
    trace.gamma.push_back(out.gamma ? 1 : 0);
    trace.alg1.push_back(rate_one_step(state.cache).gamma_hat);
    trace.alg2.push_back(k == 1 ? boot.E_gamma1 : rate_two_step(previous, model, cfg, opts).gamma_hat);
  }
  return trace;
}

}  // namespace secl
