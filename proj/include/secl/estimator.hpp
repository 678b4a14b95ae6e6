#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "secl/model.hpp"
#include "secl/numerics/ball_moments.hpp"
#include "secl/numerics/linalg.hpp"
#include "secl/trigger.hpp"

namespace secl {

struct EstimatorOptions {
  bool joseph_form = true;  // stabilized covariance update for the transmitted branch
  double quad_tol = kDefaultBallTolerance;
};

/// Per-step quantities derived from the predicted covariance M_k. They do not
/// depend on the measurement, so the rate predictors reuse them.
struct EstimatorCache {
  Matrix gain;       // M C' (C M C' + R)^{-1}
  Matrix P_z;        // M - gain C M
  Matrix K;          // gain * phi^{-1}
  Matrix N_z;        // phi (C M C' + R) phi'
  double h = 0.0;    // raw kernel mass of the silent region
  Matrix Psi;        // raw second moment over the silent region
  Vector psi;        // raw first moment over the silent region
  Matrix cond_Psi;   // Psi / h
  double prob0 = 0.0;  // probability of staying silent given the past

  /// Covariance after a silent step: P_z + K (Psi / h) K'.
  Matrix silent_covariance() const { return symmetrize(P_z + K * cond_Psi * K.transpose()); }
};

struct EstimatorState {
  int k = 0;
  Vector xhat;
  Matrix P;
  EstimatorCache cache;
};

struct Prediction {
  Vector xpred;
  Matrix M;
  Vector ypred;
};

struct StepOutput {
  bool gamma = false;
  double phi_stat = 0.0;
  Vector xhat;
  Matrix P;
  Vector innovation;
  // K psi / h: the mean shift dropped on silent steps. Zero up to quadrature error.
  Vector first_moment_diag;
};

/// Thrown when the silent region carries (numerically) no probability mass, so
/// the silent-branch covariance cannot be formed.
class DegenerateTrigger : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinSilentMass = 1e-300;

/// Builds the measurement-independent cache from a predicted covariance.
inline EstimatorCache make_cache(const LinearGaussianModel& model, const TriggerConfig& cfg, const Matrix& M,
                                 const EstimatorOptions& opts = {}) {
  const Matrix& C = model.C;
  const SpdMatrix S(C * M * C.transpose() + model.R, "innovation covariance");
  EstimatorCache c;
  c.gain = S.matrix().llt().solve(C * M).transpose();
  const Eigen::Index n = M.rows();
  if (opts.joseph_form) {
    const Matrix I_GC = Matrix::Identity(n, n) - c.gain * C;
    c.P_z = symmetrize(I_GC * M * I_GC.transpose() + c.gain * model.R * c.gain.transpose());
  } else {
    c.P_z = symmetrize(M - c.gain * C * M);
  }
  c.K = c.gain * cfg.phi_inv;
  c.N_z = symmetrize(cfg.phi * S.matrix() * cfg.phi.transpose());

  const BallMoments ball = ball_moments(SpdMatrix(c.N_z, "whitened innovation covariance"), cfg.threshold,
                                        opts.quad_tol);
  c.h = ball.mass;
  c.Psi = ball.m2;
  c.psi = ball.m1;
  c.cond_Psi = ball.cond_m2;
  c.prob0 = ball.prob;
  return c;
}

/// Step 1: x_{k,k-1} = A x_{k-1}, M_k = A P_{k-1} A' + Q.
inline Prediction predict(const EstimatorState& state, const LinearGaussianModel& model) {
  Prediction pred;
  pred.xpred = model.A * state.xhat;
  pred.M = symmetrize(model.A * state.P * model.A.transpose() + model.Q);
  pred.ypred = model.C * pred.xpred;
  return pred;
}

/// Estimator-side update once the decision is known. The innovation is only
/// read when gamma = 1.
inline StepOutput apply_decision(EstimatorState& state, const Prediction& pred, EstimatorCache cache, bool gamma,
                                 const Vector& innovation, double phi_stat = 0.0) {
  StepOutput out;
  out.gamma = gamma;
  out.phi_stat = phi_stat;
  out.innovation = innovation;
  if (gamma) {
    out.xhat = pred.xpred + cache.gain * innovation;
    out.P = cache.P_z;
  } else {
    if (!(cache.h > kMinSilentMass) || !(cache.prob0 > 0.0)) {
      throw DegenerateTrigger(
          "silent step with no probability mass in the silent region: the trigger bound is too tight for "
          "this model (h = " + std::to_string(cache.h) + ")");
    }
    out.xhat = pred.xpred;
    out.P = cache.silent_covariance();
  }
  out.first_moment_diag = cache.h > 0.0 ? Vector(cache.K * (cache.psi / cache.h))
                                        : Vector(Vector::Zero(cache.K.rows()));
  state.xhat = out.xhat;
  state.P = out.P;
  state.cache = std::move(cache);
  return out;
}

/// Sensor-side decision followed by the estimator update, for a prediction
/// already formed from the past.
inline StepOutput update(EstimatorState& state, const LinearGaussianModel& model, const TriggerConfig& cfg,
                         const Prediction& pred, const Vector& y, const EstimatorOptions& opts = {}) {
  if (y.size() != model.p()) throw std::invalid_argument("update: measurement has the wrong dimension");
  const Vector innovation = y - pred.ypred;
  const Decision d = decide(cfg, innovation);
  return apply_decision(state, pred, make_cache(model, cfg, pred.M, opts), d.gamma, innovation, d.phi_stat);
}

struct InitResult {
  StepOutput output;
  EstimatorState state;
};

/// Time-zero step: the prior (x0_mean, x0_cov) plays the role of the prediction.
inline InitResult initialize(const LinearGaussianModel& model, const TriggerConfig& cfg, const Vector& y0,
                             const EstimatorOptions& opts = {}) {
  model.validate();
  if (cfg.p() != model.p()) throw std::invalid_argument("initialize: trigger and model disagree on p");
  Prediction prior{model.x0_mean, symmetrize(model.x0_cov), model.C * model.x0_mean};
  InitResult r;
  r.state.k = 0;
  r.output = update(r.state, model, cfg, prior, y0, opts);
  return r;
}

/// One full recursion step k-1 -> k.
inline StepOutput step(EstimatorState& state, const LinearGaussianModel& model, const TriggerConfig& cfg,
                       const Vector& y, const EstimatorOptions& opts = {}) {
  const Prediction pred = predict(state, model);
  StepOutput out = update(state, model, cfg, pred, y, opts);
  ++state.k;
  return out;
}

}  // namespace secl
