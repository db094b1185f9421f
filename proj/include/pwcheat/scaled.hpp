#pragma once

#include <algorithm>
#include <cmath>

namespace pwcheat {

/// A real number stored as mantissa * exp(log_scale).
///
/// Solutions of psi'' = k^2 q^2 psi grow like exp(k q x); for k q beyond ~710
/// the plain double overflows. Every quantity that can grow that way is carried
/// in this form and only collapsed to a double when a ratio is formed.
struct Scaled {
  double mantissa = 0.0;
  double log_scale = 0.0;

  static Scaled of(double v) { return {v, 0.0}; }

  /// Plain value; may overflow to +-inf or underflow to 0.
  double value() const { return mantissa * std::exp(log_scale); }

  /// log|value|; -inf for zero.
  double log_abs() const { return std::log(std::abs(mantissa)) + log_scale; }

  int sign() const { return (mantissa > 0.0) - (mantissa < 0.0); }
  bool is_zero() const { return mantissa == 0.0; }
  bool is_finite() const { return std::isfinite(mantissa) && std::isfinite(log_scale); }

  /// Moves binary exponent of the mantissa into log_scale when it drifts far
  /// from 1. Values in the ordinary range are left untouched (bit-exact).
  Scaled normalized() const {
    if (mantissa == 0.0 || !std::isfinite(mantissa)) return {mantissa, 0.0};
    int exponent = 0;
    const double fraction = std::frexp(mantissa, &exponent);
    if (exponent > -400 && exponent < 400) return *this;
    return {fraction, log_scale + exponent * std::log(2.0)};
  }

  /// Same value expressed against a given log scale (mantissa may under/overflow).
  double mantissa_at(double target_log_scale) const {
    if (mantissa == 0.0) return 0.0;
    return mantissa * std::exp(log_scale - target_log_scale);
  }
};

inline Scaled operator*(const Scaled& a, const Scaled& b) {
  return Scaled{a.mantissa * b.mantissa, a.log_scale + b.log_scale}.normalized();
}

inline Scaled operator*(const Scaled& a, double s) { return Scaled{a.mantissa * s, a.log_scale}.normalized(); }
inline Scaled operator*(double s, const Scaled& a) { return a * s; }
inline Scaled operator/(const Scaled& a, const Scaled& b) {
  return Scaled{a.mantissa / b.mantissa, a.log_scale - b.log_scale}.normalized();
}
inline Scaled operator-(const Scaled& a) { return {-a.mantissa, a.log_scale}; }

inline Scaled operator+(const Scaled& a, const Scaled& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  // Align on the operand with the larger magnitude so the other shrinks.
  const bool a_dominates = a.log_abs() >= b.log_abs();
  const Scaled& big = a_dominates ? a : b;
  const Scaled& small = a_dominates ? b : a;
  return Scaled{big.mantissa + small.mantissa_at(big.log_scale), big.log_scale}.normalized();
}

inline Scaled operator-(const Scaled& a, const Scaled& b) { return a + (-b); }

inline Scaled abs(const Scaled& a) { return {std::abs(a.mantissa), a.log_scale}; }

/// a / b as a plain double; finite whenever the ratio itself is representable.
inline double ratio(const Scaled& a, const Scaled& b) {
  return a.mantissa / b.mantissa * std::exp(a.log_scale - b.log_scale);
}

}  // namespace pwcheat
