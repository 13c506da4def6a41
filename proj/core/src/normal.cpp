#include "psmrwm/normal.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace psmrwm {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
// Below this, erfc(-z/sqrt2) is close enough to underflow that the
// asymptotic series is the better route.
constexpr double kLogCdfSeriesCut = -30.0;
}  // namespace

double norm_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double norm_log_pdf(double z) { return -0.5 * z * z - kLogSqrt2Pi; }

double norm_cdf(double z) { return 0.5 * std::erfc(-z * kInvSqrt2); }

double norm_log_cdf(double z) {
  if (std::isnan(z)) return z;
  if (z >= kLogCdfSeriesCut) {
    if (z > 5.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
    return std::log(0.5 * std::erfc(-z * kInvSqrt2));
  }
  if (std::isinf(z)) return -std::numeric_limits<double>::infinity();
  // Phi(z) = phi(z)/|z| * (1 - 1/z^2 + 3/z^4 - 15/z^6 + 105/z^8 - ...)
  const double r = 1.0 / (z * z);
  const double series = 1.0 + r * (-1.0 + r * (3.0 + r * (-15.0 + r * 105.0)));
  return norm_log_pdf(z) - std::log(-z) + std::log(series);
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace psmrwm
