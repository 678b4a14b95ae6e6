#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "secl/numerics/linalg.hpp"
#include "secl/numerics/quadrature.hpp"

namespace secl {

/// Moments of the unnormalized zero-mean Gaussian kernel
/// g(z) = exp(-z' n^{-1} z / 2) over the centered ball {z : z'z <= radius2}.
struct BallMoments {
  double mass = 0.0;  // raw integral of g over the ball
  double prob = 0.0;  // mass / ((2 pi)^{p/2} |n|^{1/2})
  Vector m1;          // raw first moment, zero up to integration error
  Matrix m2;          // raw second moment
  Matrix cond_m2;     // m2 / mass, computed without forming either factor
  double error_estimate = 0.0;
};

inline constexpr double kDefaultBallTolerance = 1e-8;

// Dimensions up to this use nested adaptive quadrature; larger ones use QMC.
inline constexpr int kMaxNestedDimension = 3;

namespace detail {

// Moments of z ~ N(0, diag(lambda)) restricted to the ball, in the eigen frame:
// prob = P(ball), first[i] = E[z_i 1_ball], second[i] = E[z_i^2 1_ball].
// Off-diagonal second moments vanish by symmetry of the region.
struct DiagonalBallMoments {
  double prob = 0.0;
  Vector first;
  Vector second;
  double error = 0.0;
};

inline double normal_pdf(double z, double var) {
  return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

// Mass of a coordinate beyond this many standard deviations (e^-84) is dropped,
// so narrow Gaussians inside a wide ball are not missed by the rule's nodes.
inline constexpr double kSupportSigmas = 13.0;

// Slots: [0] prob, [1..3] first moments, [4..6] second moments.
using NestedValue = QuadValue<1 + 2 * kMaxNestedDimension>;

class NestedBallIntegrator {
 public:
  NestedBallIntegrator(const Vector& lambda, double tol) : lambda_(lambda), tol_(tol) {
    p_ = static_cast<int>(lambda.size());
    scale_.fill(0.0);
    scale_[0] = 1.0;
    for (int i = 0; i < p_; ++i) {
      scale_[1 + i] = std::sqrt(lambda_[i]);
      scale_[1 + kMaxNestedDimension + i] = lambda_[i];
    }
  }

  NestedValue run(double radius2) { return level(0, radius2, tol_); }
  double worst_error() const { return worst_error_; }

 private:
  // Innermost coordinate in closed form via erf.
  NestedValue innermost(int j, double rho) const {
    NestedValue v{};
    const double s = std::sqrt(std::max(rho, 0.0));
    const double u = s / std::sqrt(lambda_[j]);
    const double inside = std::erf(u / std::numbers::sqrt2);
    v[0] = inside;
    v[1 + j] = 0.0;
    v[1 + kMaxNestedDimension + j] =
        lambda_[j] * (inside - std::sqrt(2.0 / std::numbers::pi) * u * std::exp(-0.5 * u * u));
    return v;
  }

  // Integrates coordinate j over [-sqrt(rho), sqrt(rho)] with z = sqrt(rho) sin(theta),
  // which removes the square-root endpoint behaviour of the inner limits.
  NestedValue level(int j, double rho, double tol) {
    if (j == p_ - 1) return innermost(j, rho);
    const double root = std::sqrt(rho);
    const double var = lambda_[j];
    const double inner_tol = 0.1 * tol;
    auto integrand = [&](double theta) {
      const double c = std::cos(theta);
      const double z = root * std::sin(theta);
      const double w = root * c * normal_pdf(z, var);
      NestedValue out{};
      if (w == 0.0) return out;
      const NestedValue inner = level(j + 1, rho * c * c, inner_tol);
      out[0] = w * inner[0];
      out[1 + j] = w * z * inner[0];
      out[1 + kMaxNestedDimension + j] = w * z * z * inner[0];
      for (int i = j + 1; i < p_; ++i) {
        out[1 + i] = w * inner[1 + i];
        out[1 + kMaxNestedDimension + i] = w * inner[1 + kMaxNestedDimension + i];
      }
      return out;
    };
    const double half_width = kSupportSigmas * std::sqrt(var);
    const double theta_max = half_width >= root ? 0.5 * std::numbers::pi : std::asin(half_width / root);
    const auto res =
        integrate_adaptive<std::tuple_size_v<NestedValue>>(integrand, -theta_max, theta_max, scale_, tol);
    if (!res.converged) {
      throw QuadratureError("ball_moments: nested quadrature did not converge", res.error);
    }
    if (j == 0) worst_error_ = res.error;
    return res.value;
  }

  Vector lambda_;
  double tol_;
  int p_ = 0;
  NestedValue scale_{};
  double worst_error_ = 0.0;
};

inline DiagonalBallMoments nested_moments(const Vector& lambda, double radius2, double tol) {
  NestedBallIntegrator integrator(lambda, tol);
  const NestedValue v = integrator.run(radius2);
  const int p = static_cast<int>(lambda.size());
  DiagonalBallMoments out;
  out.prob = v[0];
  out.first.resize(p);
  out.second.resize(p);
  for (int i = 0; i < p; ++i) {
    out.first[i] = v[1 + i];
    out.second[i] = v[1 + kMaxNestedDimension + i];
  }
  out.error = integrator.worst_error();
  return out;
}

inline constexpr std::array<int, 32> kHaltonPrimes = {
    2,  3,  5,  7,  11, 13, 17, 19, 23, 29,  31,  37,  41,  43,  47,  53,
    59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127, 131};

inline double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

// Randomized (Cranley-Patterson shifted) Halton estimate. Odd moments vanish
// by symmetry of the region and are reported as zero. The error is three
// standard errors across the independent shifts.
inline DiagonalBallMoments qmc_moments(const Vector& lambda, double radius2, double tol) {
  const int p = static_cast<int>(lambda.size());
  if (p > static_cast<int>(kHaltonPrimes.size())) {
    throw std::invalid_argument("ball_moments: dimension too large for the QMC fallback");
  }
  constexpr int kShifts = 16;
  std::mt19937_64 rng(0x5ec1u);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Vector> shifts(kShifts, Vector(p));
  for (auto& s : shifts) {
    for (int i = 0; i < p; ++i) s[i] = uniform(rng);
  }
  const Vector stddev = lambda.cwiseSqrt();

  std::uint64_t points = 1024;
  DiagonalBallMoments out;
  for (;;) {
    std::vector<double> prob(kShifts, 0.0);
    std::vector<Vector> second(kShifts, Vector::Zero(p));
    Vector z(p);
    for (int r = 0; r < kShifts; ++r) {
      for (std::uint64_t n = 1; n <= points; ++n) {
        double norm2 = 0.0;
        for (int i = 0; i < p; ++i) {
          double u = radical_inverse(n, kHaltonPrimes[i]) + shifts[r][i];
          u -= std::floor(u);
          u = std::clamp(u, 1e-300, 1.0 - 1e-16);
          z[i] = stddev[i] * std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
          norm2 += z[i] * z[i];
        }
        if (norm2 <= radius2) {
          prob[r] += 1.0;
          second[r] += z.cwiseAbs2();
        }
      }
      prob[r] /= static_cast<double>(points);
      second[r] /= static_cast<double>(points);
    }
    double mean = 0.0;
    Vector second_mean = Vector::Zero(p);
    for (int r = 0; r < kShifts; ++r) {
      mean += prob[r] / kShifts;
      second_mean += second[r] / kShifts;
    }
    double var = 0.0;
    Vector second_var = Vector::Zero(p);
    for (int r = 0; r < kShifts; ++r) {
      var += (prob[r] - mean) * (prob[r] - mean);
      second_var += (second[r] - second_mean).cwiseAbs2();
    }
    var /= kShifts * (kShifts - 1.0);
    second_var /= kShifts * (kShifts - 1.0);
    double err = 3.0 * std::sqrt(var);
    for (int i = 0; i < p; ++i) err = std::max(err, 3.0 * std::sqrt(second_var[i]) / lambda[i]);

    out.prob = mean;
    out.first = Vector::Zero(p);
    out.second = second_mean;
    out.error = err;
    if (err <= tol || points >= (1u << 16)) return out;
    points *= 4;
  }
}

inline DiagonalBallMoments diagonal_moments(const Vector& lambda, double radius2, double tol) {
  return lambda.size() <= kMaxNestedDimension ? nested_moments(lambda, radius2, tol)
                                              : qmc_moments(lambda, radius2, tol);
}

}  // namespace detail

/// Zeroth, first and second moments of exp(-z' n^{-1} z / 2) over the ball
/// z'z <= radius2.
///
/// The ball is rotation invariant, so the integrals are evaluated in the
/// eigenframe of n, where the second moment is diagonal, and rotated back.
/// radius2 = 0 gives all-zero moments and radius2 = +inf the untruncated ones.
inline BallMoments ball_moments(const SpdMatrix& n, double radius2, double tol = kDefaultBallTolerance) {
  if (!(radius2 >= 0.0)) throw std::domain_error("ball_moments: radius2 must be >= 0");
  if (!(tol > 0.0)) throw std::domain_error("ball_moments: tol must be > 0");

  const Eigen::Index p = n.dim();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(n.matrix());
  // Largest variance outermost; the innermost coordinate is integrated in closed form.
  const Vector lambda = eig.eigenvalues().reverse();
  const Matrix basis = eig.eigenvectors().rowwise().reverse();
  const double log_norm = 0.5 * static_cast<double>(p) * std::log(2.0 * std::numbers::pi) +
                          0.5 * lambda.array().log().sum();
  const double norm = std::exp(log_norm);

  BallMoments out;
  if (radius2 == 0.0) {
    out.m1 = Vector::Zero(p);
    out.m2 = Matrix::Zero(p, p);
    out.cond_m2 = Matrix::Zero(p, p);
    return out;
  }
  if (std::isinf(radius2)) {
    out.prob = 1.0;
    out.mass = norm;
    out.m1 = Vector::Zero(p);
    out.cond_m2 = n.matrix();
    out.m2 = norm * n.matrix();
    return out;
  }

  const detail::DiagonalBallMoments d = detail::diagonal_moments(lambda, radius2, tol);
  out.prob = std::clamp(d.prob, 0.0, 1.0);
  out.mass = out.prob * norm;
  out.m1 = norm * (basis * d.first);
  out.m2 = symmetrize(norm * (basis * d.second.asDiagonal() * basis.transpose()));
  if (d.prob > 0.0) {
    out.cond_m2 = symmetrize(basis * (d.second / d.prob).asDiagonal() * basis.transpose());
  } else {
    out.cond_m2 = Matrix::Zero(p, p);
  }
  out.error_estimate = d.error;
  return out;
}

/// E[z z' | z'z <= radius2] for z ~ N(0, n).
inline Matrix truncated_second_moment(const SpdMatrix& n, double radius2, double tol = kDefaultBallTolerance) {
  return ball_moments(n, radius2, tol).cond_m2;
}

/// Probability that z ~ N(0, n) lands in the ball; the normalized zeroth moment.
inline double ball_probability(const SpdMatrix& n, double radius2, double tol = kDefaultBallTolerance) {
  return ball_moments(n, radius2, tol).prob;
}

/// Monte Carlo estimate of the ball probability and conditional second moment,
/// sampling z ~ N(0, n) directly. Used as an independent cross-check.
struct BallMonteCarlo {
  double prob = 0.0;
  Matrix cond_m2;
  std::int64_t samples = 0;
  std::int64_t hits = 0;
};

template <class Rng>
BallMonteCarlo ball_monte_carlo(const SpdMatrix& n, double radius2, std::int64_t samples, Rng& rng) {
  const Eigen::Index p = n.dim();
  const Matrix root = n.matrix().llt().matrixL();
  std::normal_distribution<double> normal;
  BallMonteCarlo out;
  out.samples = samples;
  out.cond_m2 = Matrix::Zero(p, p);
  Vector g(p);
  for (std::int64_t s = 0; s < samples; ++s) {
    for (Eigen::Index i = 0; i < p; ++i) g[i] = normal(rng);
    const Vector z = root * g;
    if (z.squaredNorm() <= radius2) {
      ++out.hits;
      out.cond_m2.noalias() += z * z.transpose();
    }
  }
  out.prob = static_cast<double>(out.hits) / static_cast<double>(samples);
  if (out.hits > 0) out.cond_m2 /= static_cast<double>(out.hits);
  return out;
}

}  // namespace secl
