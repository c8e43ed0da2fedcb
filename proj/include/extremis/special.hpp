#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <cstddef>
#include <numbers>

namespace extremis {

inline constexpr double kEulerGamma = 0.57721566490153286061;

inline double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Inverse standard-normal CDF. p must lie in (0, 1).
inline double normal_ppf(double p) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// Upper-tail inverse: returns x with 1 - Phi(x) = q, accurate for tiny q.
inline double normal_isf(double q) { return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q); }

// 1-based order-statistic index ceil(q * n) with a guard against products
// such as 0.98 * 100 = 98.00000000000001. Clamped to [1, n].
inline std::size_t order_statistic_index(double q, std::size_t n) noexcept {
  const double x = q * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))));
  if (k < 1) k = 1;
  if (k > n) k = n;
  return k;
}

}  // namespace extremis
