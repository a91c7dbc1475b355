#pragma once

#include <array>
#include <cmath>

#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"

namespace kin3d {

/// Yaw split into an axis class, a heading flip and a restricted-range offset.
///
/// axis 0 (vertical) keeps the offset in [-pi, 0); axis 1 (horizontal) keeps it
/// in [-pi/2, pi/2). heading is 1 when the offset differs from the yaw by pi.
struct OrientationDecomp {
  int theta_a = 1;
  int theta_h = 0;
  double theta_r = 0.0;
};

/// Per-axis anchor orientations {Φ0, Φ1}.
using AxisAnchors = std::array<double, 2>;

struct BinDecomp {
  int bin_index = 0;
  double offset = 0.0;
};

struct MeasurementYaw {
  double tau_theta;  // in [-pi/2, pi/2)
  int theta_h;
};

inline OrientationDecomp decompose(double theta) {
  if (!(theta >= -kPi && theta < kPi)) throw Error(Errc::RangeError, "yaw outside [-pi, pi)");
  OrientationDecomp d;
  // |sin| = |cos| at odd multiples of pi/4 goes to axis 0, including rounding noise
  d.theta_a = std::abs(std::cos(theta)) - std::abs(std::sin(theta)) > 1e-12 ? 1 : 0;
  const double lo = d.theta_a == 0 ? -kPi : -kHalfPi;
  const double hi = lo + kPi;
  double r = theta;
  while (r >= hi) r -= kPi;
  while (r < lo) r += kPi;
  d.theta_r = r;
  d.theta_h = std::abs(theta - r) <= 1e-12 ? 0 : 1;
  return d;
}

inline double encode_offset(const OrientationDecomp& d, const AxisAnchors& anchors) {
  return d.theta_r - anchors[d.theta_a != 0 ? 1 : 0];
}

/// theta = Φ[round(theta_a)] + round(theta_h)·pi + t_theta_r, wrapped into [-pi, pi).
/// theta_a and theta_h may be classifier probabilities.
inline double recompose(double theta_a, double theta_h, double t_theta_r, const AxisAnchors& anchors) {
  const int axis = std::round(theta_a) >= 1.0 ? 1 : 0;
  const double heading = std::round(theta_h) >= 1.0 ? 1.0 : 0.0;
  return wrap_angle(anchors[axis] + heading * kPi + t_theta_r);
}

// Bin-based baseline: n bins centred at 2πk/n.

inline BinDecomp bin_decompose(double theta, int n_bins) {
  if (n_bins < 2) throw Error(Errc::RangeError, "bin codec needs at least two bins");
  const double width = kTwoPi / n_bins;
  double t = std::fmod(theta, kTwoPi);
  if (t < 0.0) t += kTwoPi;
  int k = static_cast<int>(std::lround(t / width)) % n_bins;
  return {k, wrap_angle(theta - width * k)};
}

inline double bin_recompose(const BinDecomp& b, int n_bins) {
  if (n_bins < 2) throw Error(Errc::RangeError, "bin codec needs at least two bins");
  return wrap_angle(kTwoPi / n_bins * b.bin_index + b.offset);
}

/// Measurement yaw in the tracker's half-turn range, with the removed half turn as heading.
inline MeasurementYaw measurement_theta_split(double theta) {
  if (!(theta >= -kPi && theta < kPi)) throw Error(Errc::RangeError, "yaw outside [-pi, pi)");
  double t = theta;
  int h = 0;
  if (t >= kHalfPi) {
    t -= kPi;
    h = 1;
  } else if (t < -kHalfPi) {
    t += kPi;
    h = 1;
  }
  return {t, h};
}

inline double measurement_theta_merge(double tau_theta, double theta_h) {
  return wrap_angle(tau_theta + (std::round(theta_h) >= 1.0 ? kPi : 0.0));
}

}  // namespace kin3d
