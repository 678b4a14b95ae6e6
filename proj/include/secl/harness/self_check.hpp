#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "secl/estimator.hpp"
#include "secl/harness/experiment.hpp"
#include "secl/model.hpp"
#include "secl/numerics/ball_moments.hpp"
#include "secl/numerics/chi_square.hpp"
#include "secl/trigger.hpp"

namespace secl {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Quick built-in oracle suite run by `secl check`. Each check compares the
/// library against a closed form, a sampling estimate or a plain Kalman filter.
inline std::vector<CheckResult> run_self_checks(std::uint64_t seed = 7) {
  std::vector<CheckResult> results;
  auto add = [&](std::string name, bool ok, const std::string& detail) {
    results.push_back({std::move(name), ok, detail});
  };
  auto num = [](double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
  };

  {
    const double c = chi_square_quantile(0.05, 2);
    add("chi-square 95% quantile, 2 dof = 5.991", std::abs(c - 5.991) < 5e-4, "got " + num(c));
  }
  {
    const double c = chi_square_quantile(0.05, 2);
    const double prob = ball_probability(SpdMatrix(Matrix::Identity(2, 2)), c);
    add("ball probability at the 95% quantile", std::abs(prob - 0.95) <= 1e-6, "got " + num(prob));
  }
  {
    double worst = 0.0;
    for (double r2 : {0.1, 1.0, 3.0, 5.991, 12.0}) {
      const double prob = ball_probability(SpdMatrix(Matrix::Identity(2, 2)), r2);
      worst = std::max(worst, std::abs(prob - (1.0 - std::exp(-0.5 * r2))));
    }
    add("ball probability vs polar closed form", worst <= 1e-8, "max error " + num(worst));
  }
  {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    bool ok = true;
    double worst_sigma = 0.0;
    constexpr std::int64_t kSamples = 200000;
    for (int trial = 0; trial < 6; ++trial) {
      const int p = 1 + trial % 3;
      Matrix g(p, p);
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) g(i, j) = normal(rng);
      const SpdMatrix n(g * g.transpose() + 0.3 * Matrix::Identity(p, p));
      const double r2 = chi_square_quantile(0.05, p);
      const double q = ball_probability(n, r2);
      const BallMonteCarlo mc = ball_monte_carlo(n, r2, kSamples, rng);
      const double sigma = std::sqrt(q * (1.0 - q) / kSamples);
      const double z = std::abs(mc.prob - q) / sigma;
      worst_sigma = std::max(worst_sigma, z);
      ok = ok && z <= 3.0;
    }
    add("ball probability vs Monte Carlo (3 sigma)", ok, "max deviation " + num(worst_sigma) + " sigma");
  }

  const LinearGaussianModel model = tracking_preset();
  const TriggerConfig trig = make_config(SpdMatrix(case_nbar(1)));
  Rng rng(derive_seed(seed, 1));
  const Trajectory traj = simulate(model, 100, rng, tracking_true_initial_state());
  {
    // Always transmit: must reduce to the Kalman filter.
    const TriggerConfig always = trig.with_threshold(0.0);
    InitResult init = initialize(model, always, traj.measurements[0]);
    Vector x = model.x0_mean;
    Matrix P = model.x0_cov;
    auto kf_correct = [&](const Vector& y) {
      const Matrix S = model.C * P * model.C.transpose() + model.R;
      const Matrix K = P * model.C.transpose() * S.inverse();
      x += K * (y - model.C * x);
      P = symmetrize((Matrix::Identity(3, 3) - K * model.C) * P);
    };
    kf_correct(traj.measurements[0]);
    double worst = std::max((init.state.xhat - x).cwiseAbs().maxCoeff(), (init.state.P - P).cwiseAbs().maxCoeff());
    for (int k = 1; k <= 100; ++k) {
      step(init.state, model, always, traj.measurements[k]);
      x = model.A * x;
      P = model.A * P * model.A.transpose() + model.Q;
      kf_correct(traj.measurements[k]);
      worst = std::max(worst, (init.state.xhat - x).cwiseAbs().maxCoeff() / std::max(1.0, x.cwiseAbs().maxCoeff()));
      worst = std::max(worst, (init.state.P - P).cwiseAbs().maxCoeff() / std::max(1.0, P.cwiseAbs().maxCoeff()));
    }
    add("always-transmit limit equals Kalman filter", worst <= 1e-10, "max relative deviation " + num(worst));
  }
  {
    const double angle = 0.7;
    Matrix U(2, 2);
    U << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    const TriggerConfig rotated = trig.with_rotated_factor(U);
    InitResult a = initialize(model, trig, traj.measurements[0]);
    InitResult b = initialize(model, rotated, traj.measurements[0]);
    bool same_gamma = a.output.gamma == b.output.gamma;
    double worst = (a.state.P - b.state.P).cwiseAbs().maxCoeff();
    double worst_m1 = std::max(a.state.cache.psi.cwiseAbs().maxCoeff(), b.state.cache.psi.cwiseAbs().maxCoeff());
    for (int k = 1; k <= 100; ++k) {
      const StepOutput oa = step(a.state, model, trig, traj.measurements[k]);
      const StepOutput ob = step(b.state, model, rotated, traj.measurements[k]);
      same_gamma = same_gamma && oa.gamma == ob.gamma;
      worst = std::max(worst, (a.state.P - b.state.P).cwiseAbs().maxCoeff());
      worst_m1 = std::max(worst_m1, a.state.cache.psi.cwiseAbs().maxCoeff());
    }
    add("trigger factor rotation invariance", same_gamma && worst <= 1e-9, "max |dP| " + num(worst));
    add("first moment over the silent region vanishes", worst_m1 <= 1e-7, "max |psi| " + num(worst_m1));
  }
  return results;
}

}  // namespace secl
