#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "secl/numerics/linalg.hpp"

namespace secl {

/// x_{k+1} = A x_k + w_k,  y_k = C x_k + v_k,  w ~ N(0, Q), v ~ N(0, R),
/// x_0 ~ N(x0_mean, x0_cov), all mutually independent.
struct LinearGaussianModel {
  Matrix A;
  Matrix C;
  Matrix Q;
  Matrix R;
  Vector x0_mean;
  Matrix x0_cov;

  Eigen::Index n() const noexcept { return A.rows(); }
  Eigen::Index p() const noexcept { return C.rows(); }

  /// Throws std::invalid_argument on inconsistent dimensions and
  /// NotPositiveDefinite if Q or x0_cov is not PSD or R is not SPD.
  void validate() const {
    const auto nn = n();
    const auto pp = p();
    auto require = [](bool ok, const char* msg) {
      if (!ok) throw std::invalid_argument(std::string("LinearGaussianModel: ") + msg);
    };
    require(nn > 0 && A.cols() == nn, "A must be square and non-empty");
    require(pp > 0 && C.cols() == nn, "C must be p x n");
    require(Q.rows() == nn && Q.cols() == nn, "Q must be n x n");
    require(R.rows() == pp && R.cols() == pp, "R must be p x p");
    require(x0_mean.size() == nn, "x0_mean must have n entries");
    require(x0_cov.rows() == nn && x0_cov.cols() == nn, "x0_cov must be n x n");
    if (!is_psd(Q)) throw NotPositiveDefinite("LinearGaussianModel: Q is not positive semidefinite");
    if (!is_psd(x0_cov)) throw NotPositiveDefinite("LinearGaussianModel: x0_cov is not positive semidefinite");
    SpdMatrix(R, "LinearGaussianModel: R");
  }
};

struct Trajectory {
  std::vector<Vector> states;        // x_0 ... x_K
  std::vector<Vector> measurements;  // y_0 ... y_K
};

/// Draws from N(mean, cov) with an eigendecomposition square root, so
/// singular covariances are allowed.
class GaussianSampler {
 public:
  GaussianSampler() = default;
  explicit GaussianSampler(const Matrix& cov) : root_(psd_sqrt(cov)) {}

  template <class Rng>
  Vector draw(Rng& rng) const {
    std::normal_distribution<double> normal;
    Vector g(root_.cols());
    for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = normal(rng);
    return root_ * g;
  }

  Eigen::Index dim() const noexcept { return root_.rows(); }

 private:
  Matrix root_;
};

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Per-trial seed: splitmix64(master ^ splitmix64(index)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(master ^ splitmix64(index));
}

using Rng = std::mt19937_64;

/// Samples a trajectory of K+1 states and measurements. When initial_state is
/// given it replaces the draw of x_0 from the prior (a known true target state).
template <class Generator>
Trajectory simulate(const LinearGaussianModel& model, int steps, Generator& rng,
                    const std::optional<Vector>& initial_state = std::nullopt) {
  model.validate();
  if (steps < 0) throw std::invalid_argument("simulate: steps must be >= 0");
  if (initial_state && initial_state->size() != model.n()) {
    throw std::invalid_argument("simulate: initial state has the wrong dimension");
  }
  const GaussianSampler prior(model.x0_cov);
  const GaussianSampler process(model.Q);
  const GaussianSampler sensor(model.R);

  Trajectory traj;
  traj.states.reserve(steps + 1);
  traj.measurements.reserve(steps + 1);
  Vector x = initial_state ? *initial_state : Vector(model.x0_mean + prior.draw(rng));
  for (int k = 0; k <= steps; ++k) {
    if (k > 0) x = model.A * x + process.draw(rng);
    traj.states.push_back(x);
    traj.measurements.push_back(model.C * x + sensor.draw(rng));
  }
  return traj;
}

/// Maneuvering-target (Singer-type) model with position/velocity/acceleration
/// state, position and acceleration measured.
///
/// The transition matrix carries T^2 in its top-right entry, as in the
/// reference experiment, rather than the T^2/2 of constant-acceleration
/// kinematics.
inline LinearGaussianModel tracking_preset(double T = 1.0, double a = 2.0, double sigma_m2 = 0.5) {
  if (!(T > 0.0)) throw std::domain_error("tracking_preset: sampling period must be > 0");
  if (!(a > 0.0)) throw std::domain_error("tracking_preset: maneuver constant must be > 0");
  if (!(sigma_m2 >= 0.0)) throw std::domain_error("tracking_preset: acceleration variance must be >= 0");

  const double T2 = T * T;
  const double T3 = T2 * T;
  const double T4 = T3 * T;
  const double T5 = T4 * T;

  LinearGaussianModel m;
  m.A.resize(3, 3);
  m.A << 1, T, T2,
         0, 1, T,
         0, 0, 1;
  m.Q.resize(3, 3);
  m.Q << T5 / 20, T4 / 8, T3 / 6,
         T4 / 8,  T3 / 3, T2 / 2,
         T3 / 6,  T2 / 2, T;
  m.Q *= 2.0 * a * sigma_m2;
  m.C.resize(2, 3);
  m.C << 1, 0, 0,
         0, 0, 1;
  m.R.resize(2, 2);
  m.R << 60, 0,
         0, 10;
  m.x0_mean = Eigen::Vector3d(3500.0, 40.0, 0.0);
  m.x0_cov.resize(3, 3);
  m.x0_cov << 3600.0,     3600.0 / T,      0,
              3600.0 / T, 7200.0 / T2,     0,
              0,          0,               0;
  return m;
}

/// True initial target state of the tracking scenario: 3410 m, 30 m/s, 0 m/s^2.
inline Vector tracking_true_initial_state() { return Eigen::Vector3d(3410.0, 30.0, 0.0); }

}  // namespace secl
