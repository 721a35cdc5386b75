#pragma once

#include <cmath>

namespace glab {

// Branch-free sine and cosine for the inner loops. Range reduction to
// [-pi/2, pi/2] with a two-part pi, then Taylor polynomials through degree
// 19/20. Written so GCC vectorizes loops that call them. Accurate to a few ulp
// for |x| < 1e4; NaN propagates.
namespace detail {
inline constexpr double kInvPi = 0.318309886183790671538;
inline constexpr double kPiHi = 3.14159265358979311600;
inline constexpr double kPiLo = 1.22464679914735317720e-16;

// Round to nearest by the 1.5 * 2^52 trick; plain arithmetic keeps loops
// vectorizable without relaxing floating-point semantics. Valid for |y| < 2^51.
inline double round_nearest(double y) {
  constexpr double kShift = 6755399441055744.0;
  return (y + kShift) - kShift;
}

// sign = (-1)^k for an integral-valued double k.
inline double parity_sign(double k) {
  const double half = 0.5 * k;
  return 1.0 - 4.0 * std::abs(half - round_nearest(half));
}
}  // namespace detail

inline double fast_sin(double x) {
  const double k = detail::round_nearest(x * detail::kInvPi);
  const double r = (x - k * detail::kPiHi) - k * detail::kPiLo;
  const double r2 = r * r;
  double p = -1.0 / 121645100408832000.0;  // -1/19!
  p = p * r2 + 1.0 / 355687428096000.0;
  p = p * r2 - 1.0 / 1307674368000.0;
  p = p * r2 + 1.0 / 6227020800.0;
  p = p * r2 - 1.0 / 39916800.0;
  p = p * r2 + 1.0 / 362880.0;
  p = p * r2 - 1.0 / 5040.0;
  p = p * r2 + 1.0 / 120.0;
  p = p * r2 - 1.0 / 6.0;
  p = p * r2 + 1.0;
  return detail::parity_sign(k) * (p * r);
}

inline double fast_cos(double x) {
  const double k = detail::round_nearest(x * detail::kInvPi);
  const double r = (x - k * detail::kPiHi) - k * detail::kPiLo;
  const double r2 = r * r;
  double p = 1.0 / 2432902008176640000.0;  // 1/20!
  p = p * r2 - 1.0 / 6402373705728000.0;
  p = p * r2 + 1.0 / 20922789888000.0;
  p = p * r2 - 1.0 / 87178291200.0;
  p = p * r2 + 1.0 / 479001600.0;
  p = p * r2 - 1.0 / 3628800.0;
  p = p * r2 + 1.0 / 40320.0;
  p = p * r2 - 1.0 / 720.0;
  p = p * r2 + 1.0 / 24.0;
  p = p * r2 - 0.5;
  p = p * r2 + 1.0;
  return detail::parity_sign(k) * p;
}

}  // namespace glab
