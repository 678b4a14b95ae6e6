#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace secl {

/// Raised when an adaptive integration exhausts its interval budget.
class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}

  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

template <std::size_t N>
using QuadValue = std::array<double, N>;

template <std::size_t N>
struct QuadResult {
  QuadValue<N> value{};
  // Weighted error: max over components of |err_i| / scale_i.
  double error = 0.0;
  int intervals = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod rule with embedded 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <std::size_t N>
struct Segment {
  double a;
  double b;
  QuadValue<N> value;
  QuadValue<N> abs_error;
  double weighted_error;

  bool operator<(const Segment& other) const { return weighted_error < other.weighted_error; }
};

template <std::size_t N, class F>
Segment<N> kronrod_segment(F& f, double a, double b, const QuadValue<N>& scale) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  QuadValue<N> kronrod{};
  QuadValue<N> gauss{};

  const QuadValue<N> fc = f(center);
  for (std::size_t i = 0; i < N; ++i) {
    kronrod[i] = kKronrodWeights[7] * fc[i];
    gauss[i] = kGaussWeights[3] * fc[i];
  }
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    const QuadValue<N> f1 = f(center - dx);
    const QuadValue<N> f2 = f(center + dx);
    for (std::size_t i = 0; i < N; ++i) {
      const double sum = f1[i] + f2[i];
      kronrod[i] += kKronrodWeights[j] * sum;
      if (j % 2 == 1) gauss[i] += kGaussWeights[j / 2] * sum;
    }
  }

  Segment<N> seg{a, b, {}, {}, 0.0};
  for (std::size_t i = 0; i < N; ++i) {
    seg.value[i] = kronrod[i] * half;
    seg.abs_error[i] = std::abs((kronrod[i] - gauss[i]) * half);
    if (scale[i] > 0.0) {
      seg.weighted_error = std::max(seg.weighted_error, seg.abs_error[i] / scale[i]);
    }
  }
  return seg;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (G7/K15) integration of a vector-valued integrand.
///
/// Components share one set of subintervals. Convergence requires the summed
/// per-component error to fall below tol * scale[i] for every component with
/// scale[i] > 0 (components with zero scale are integrated but not controlled).
/// The interval with the largest weighted error is bisected first.
template <std::size_t N, class F>
QuadResult<N> integrate_adaptive(F&& f, double a, double b, const QuadValue<N>& scale, double tol,
                                 int max_intervals = 500) {
  std::vector<detail::Segment<N>> segments;
  segments.reserve(16);
  segments.push_back(detail::kronrod_segment<N>(f, a, b, scale));

  QuadResult<N> result;
  for (;;) {
    QuadValue<N> total{};
    QuadValue<N> err{};
    for (const auto& s : segments) {
      for (std::size_t i = 0; i < N; ++i) {
        total[i] += s.value[i];
        err[i] += s.abs_error[i];
      }
    }
    result.value = total;
    result.error = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      if (scale[i] > 0.0) result.error = std::max(result.error, err[i] / scale[i]);
    }
    result.intervals = static_cast<int>(segments.size());
    if (result.error <= tol) {
      result.converged = true;
      return result;
    }
    if (result.intervals >= max_intervals) {
      result.converged = false;
      return result;
    }
    auto worst = std::max_element(segments.begin(), segments.end());
    const double lo = worst->a;
    const double hi = worst->b;
    const double mid = 0.5 * (lo + hi);
    *worst = detail::kronrod_segment<N>(f, lo, mid, scale);
    segments.push_back(detail::kronrod_segment<N>(f, mid, hi, scale));
  }
}

}  // namespace secl
