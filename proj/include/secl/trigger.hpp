#pragma once

#include <limits>
#include <stdexcept>

#include "secl/numerics/chi_square.hpp"
#include "secl/numerics/linalg.hpp"
#include "secl/numerics/precision.hpp"

namespace secl {

inline constexpr double kDefaultAlpha = 0.05;

/// Confidence-level trigger. The sensor stays silent while the whitened
/// innovation z = phi * innovation lies in the ball z'z <= threshold.
struct TriggerConfig {
  SpdMatrix nbar;   // tolerable bound on the innovation covariance
  Matrix sigma;     // nbar^{-1}
  Matrix phi;       // phi' phi = sigma
  Matrix phi_inv;
  double alpha = kDefaultAlpha;
  double threshold = 0.0;  // chi-square upper-alpha quantile with p dof

  Eigen::Index p() const noexcept { return nbar.dim(); }

  /// Copy with phi replaced by rotation * phi. The trigger and the estimator
  /// outputs are unchanged for orthogonal rotations.
  TriggerConfig with_rotated_factor(const Matrix& rotation) const {
    if (rotation.rows() != p() || rotation.cols() != p()) {
      throw std::invalid_argument("with_rotated_factor: rotation must be p x p");
    }
    TriggerConfig out = *this;
    out.phi = rotation * phi;
    out.phi_inv = out.phi.inverse();
    return out;
  }

  /// Copy with an explicit threshold (0 forces every transmission, +inf none).
  /// The result no longer corresponds to alpha.
  TriggerConfig with_threshold(double value) const {
    if (!(value >= 0.0)) throw std::domain_error("with_threshold: threshold must be >= 0");
    TriggerConfig out = *this;
    out.threshold = value;
    return out;
  }
};

struct Decision {
  bool gamma = false;
  double phi_stat = 0.0;
};

inline TriggerConfig make_config(const SpdMatrix& nbar, double alpha = kDefaultAlpha) {
  TriggerConfig cfg{nbar, nbar.inverse(), factor_precision(nbar), Matrix(), alpha, 0.0};
  cfg.phi_inv = cfg.phi.inverse();
  cfg.threshold = chi_square_quantile(alpha, static_cast<int>(nbar.dim()));
  return cfg;
}

/// gamma = 1 iff innovation' sigma innovation > threshold; the statistic is
/// evaluated as |phi * innovation|^2. A tie stays silent.
inline Decision decide(const TriggerConfig& cfg, const Vector& innovation) {
  if (innovation.size() != cfg.p()) {
    throw std::invalid_argument("decide: innovation dimension does not match the trigger");
  }
  Decision d;
  d.phi_stat = (cfg.phi * innovation).squaredNorm();
  d.gamma = d.phi_stat > cfg.threshold;
  return d;
}

}  // namespace secl
