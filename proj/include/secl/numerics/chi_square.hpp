#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace secl {

/// Upper tail probability P(chi2_dof > x).
inline double chi_square_upper_tail(double x, int dof) {
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * dof, 0.5 * x);
}

/// Returns c with P(chi2_dof > c) = alpha.
///
/// Safeguarded Newton iteration on the regularized incomplete gamma function,
/// started from the Wilson-Hilferty cube-root normal approximation. Steps that
/// leave the current bracket fall back to bisection.
inline double chi_square_quantile(double alpha, int dof) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("chi_square_quantile: alpha must lie in (0, 1)");
  }
  if (dof < 1) {
    throw std::domain_error("chi_square_quantile: degrees of freedom must be >= 1");
  }
  const double k = dof;
  const double shape = 0.5 * k;

  // Wilson-Hilferty seed.
  const double z = std::sqrt(2.0) * boost::math::erfc_inv(2.0 * alpha);
  const double v = 2.0 / (9.0 * k);
  double x = k * std::pow(std::max(1.0 - v + z * std::sqrt(v), 1e-3), 3);

  // Bracket the root: tail(lo) > alpha >= tail(hi).
  double lo = 0.0;
  double hi = std::max(2.0 * x, 1.0);
  while (chi_square_upper_tail(hi, dof) > alpha) {
    lo = hi;
    hi *= 2.0;
  }
  if (!(x > lo && x < hi)) x = 0.5 * (lo + hi);

  for (int iter = 0; iter < 200; ++iter) {
    const double f = chi_square_upper_tail(x, dof) - alpha;
    if (f > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (f == 0.0) return x;
    const double density = 0.5 * boost::math::gamma_p_derivative(shape, 0.5 * x);
    if (density > 0.0) {
      const double newton = x + f / density;
      if (std::abs(newton - x) <= 1e-15 * x) return newton;
      if (newton > lo && newton < hi) {
        x = newton;
        continue;
      }
    }
    if (hi - lo <= 1e-15 * hi) return 0.5 * (lo + hi);
    x = 0.5 * (lo + hi);
  }
  return x;
}

}  // namespace secl
