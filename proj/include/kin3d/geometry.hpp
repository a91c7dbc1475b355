#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kin3d/error.hpp"

namespace kin3d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kHalfPi = 0.5 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Angles
// ---------------------------------------------------------------------------

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double r = a - kTwoPi * std::floor((a + kPi) / kTwoPi);
  if (r >= kPi) r -= kTwoPi;
  if (r < -kPi) r += kTwoPi;
  return r;
}

struct HalfTurnWrap {
  double angle;  // in [-pi/2, pi/2)
  bool flipped;  // an odd number of half turns was removed
};

/// Wraps an angle into [-pi/2, pi/2) modulo pi and reports the parity of the shift.
inline HalfTurnWrap wrap_half_turn(double a) {
  const double turns = std::floor((a + kHalfPi) / kPi);
  double r = a - kPi * turns;
  long long k = static_cast<long long>(turns);
  if (r >= kHalfPi) {
    r -= kPi;
    ++k;
  }
  if (r < -kHalfPi) {
    r += kPi;
    --k;
  }
  return {r, (k % 2) != 0};
}

// ---------------------------------------------------------------------------
// Value types
// ---------------------------------------------------------------------------

/// Pinhole projection Υ (pixels from meters).
struct CalibProjection {
  Mat34 upsilon = Mat34::Zero();

  static CalibProjection pinhole(double f, double cu, double cv) {
    CalibProjection c;
    c.upsilon << f, 0, cu, 0,  //
        0, f, cv, 0,           //
        0, 0, 1, 0;
    return c;
  }

  /// Validates the focal terms and the homogeneous row.
  void validate() const {
    if (!upsilon.allFinite()) throw Error(Errc::UnitError, "calibration has non-finite entries");
    if (!(upsilon(0, 0) > 0.0) || !(upsilon(1, 1) > 0.0))
      throw Error(Errc::RangeError, "calibration focal terms must be positive");
  }
};

/// 3D box in camera coordinates; (x, y, z) is the box center, theta the yaw about camera Y.
struct Cuboid3D {
  double x = 0, y = 0, z = 0;
  double w3 = 1, h3 = 1, l3 = 1;
  double theta = 0;

  Vec3 center() const { return {x, y, z}; }

  void validate() const {
    for (double v : {x, y, z, w3, h3, l3, theta})
      if (!std::isfinite(v)) throw Error(Errc::UnitError, "cuboid has non-finite fields");
    if (!(w3 > 0 && h3 > 0 && l3 > 0)) throw Error(Errc::RangeError, "cuboid dimensions must be positive");
    if (theta < -kPi || theta >= kPi) throw Error(Errc::RangeError, "cuboid yaw outside [-pi, pi)");
  }
};

/// Axis-aligned image box: (x, y) is the top-left corner.
struct Box2D {
  double x = 0, y = 0, w2 = 1, h2 = 1;

  double right() const { return x + w2; }
  double bottom() const { return y + h2; }
  double cx() const { return x + 0.5 * w2; }
  double cy() const { return y + 0.5 * h2; }
  double area() const { return w2 * h2; }
};

/// Camera motion mapping frame t-1 camera coordinates into frame t: p_t = R(rho) p_{t-1} + gamma.
struct EgoMotion {
  Vec3 gamma = Vec3::Zero();
  Vec3 rho = Vec3::Zero();

  static EgoMotion identity() { return {}; }
};

struct Projection {
  double u, v, z;
};

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

/// Solves z·[u, v, 1]ᵀ = Υ·[x, y, z, 1]ᵀ for (u, v, z).
inline Projection project_center(const Vec3& p, const CalibProjection& calib) {
  const Vec3 h = calib.upsilon * p.homogeneous();
  if (!(h.z() > 0.0)) throw Error(Errc::NonPositiveDepth, "point projects with non-positive depth");
  return {h.x() / h.z(), h.y() / h.z(), h.z()};
}

/// Inverse of project_center.
inline Vec3 backproject(double u, double v, double z, const CalibProjection& calib) {
  if (!(z > 0.0)) throw Error(Errc::NonPositiveDepth, "backprojection depth must be positive");
  const Mat3 a = calib.upsilon.leftCols<3>();
  const Eigen::JacobiSVD<Mat3> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(2) > 0.0) || s(0) / s(2) > 1e12)
    throw Error(Errc::SingularCalibration, "projection matrix is ill-conditioned");
  const Vec3 rhs = z * Vec3(u, v, 1.0) - calib.upsilon.col(3);
  return a.fullPivLu().solve(rhs);
}

// ---------------------------------------------------------------------------
// Rotations
// ---------------------------------------------------------------------------

/// Fixed-axis X, then Y, then Z: R = Rz(rho_z) · Ry(rho_y) · Rx(rho_x).
inline Mat3 rotation_from_euler(const Vec3& rho) {
  return (Eigen::AngleAxisd(rho.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rho.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rho.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

/// Inverse of rotation_from_euler; rho_y is taken in [-pi/2, pi/2].
inline Vec3 euler_from_rotation(const Mat3& r) {
  const double sy = std::clamp(-r(2, 0), -1.0, 1.0);
  const double ry = std::asin(sy);
  double rx = 0.0;
  double rz = 0.0;
  if (std::abs(sy) < 1.0 - 1e-12) {
    rx = std::atan2(r(2, 1), r(2, 2));
    rz = std::atan2(r(1, 0), r(0, 0));
  } else {
    // gimbal lock: only rx - rz (or rx + rz) is observable
    rz = 0.0;
    rx = std::atan2(-r(1, 2), r(1, 1));
  }
  return {wrap_angle(rx), wrap_angle(ry), wrap_angle(rz)};
}

// ---------------------------------------------------------------------------
// Cuboid corners
// ---------------------------------------------------------------------------

/// Point in the object frame (dx along length, dz along width) expressed in camera coordinates.
inline Vec3 object_to_camera(const Cuboid3D& c, double dx, double dy, double dz) {
  const double ct = std::cos(c.theta);
  const double st = std::sin(c.theta);
  return {c.x + ct * dx + st * dz, c.y + dy, c.z - st * dx + ct * dz};
}

inline std::array<Vec3, 8> cuboid_corners(const Cuboid3D& c) {
  std::array<Vec3, 8> out;
  int k = 0;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1})
        out[k++] = object_to_camera(c, 0.5 * sx * c.l3, 0.5 * sy * c.h3, 0.5 * sz * c.w3);
  return out;
}

/// Tight image box of the 8 projected corners.
inline Box2D project_cuboid_to_box2d(const Cuboid3D& c, const CalibProjection& calib) {
  double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
  for (const Vec3& p : cuboid_corners(c)) {
    const Vec3 h = calib.upsilon * p.homogeneous();
    if (!(h.z() > 0.0)) throw Error(Errc::BehindCamera, "cuboid corner behind the camera");
    const double u = h.x() / h.z();
    const double v = h.y() / h.z();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    vmin = std::min(vmin, v);
    vmax = std::max(vmax, v);
  }
  return {umin, vmin, umax - umin, vmax - vmin};
}

// ---------------------------------------------------------------------------
// IoU
// ---------------------------------------------------------------------------

inline double iou_2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

namespace detail {

struct Pt {
  double x, z;
};

inline double cross(const Pt& o, const Pt& a, const Pt& b) {
  return (a.x - o.x) * (b.z - o.z) - (a.z - o.z) * (b.x - o.x);
}

inline double polygon_area(const std::vector<Pt>& poly) {
  double s = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Pt& p = poly[i];
    const Pt& q = poly[(i + 1) % n];
    s += p.x * q.z - q.x * p.z;
  }
  return 0.5 * s;
}

/// BEV footprint of a cuboid as a counter-clockwise quad in the (x, z) plane.
inline std::vector<Pt> footprint(const Cuboid3D& c) {
  std::vector<Pt> poly;
  poly.reserve(4);
  for (auto [sx, sz] : {std::pair{1, 1}, std::pair{-1, 1}, std::pair{-1, -1}, std::pair{1, -1}}) {
    const Vec3 p = object_to_camera(c, 0.5 * sx * c.l3, 0.0, 0.5 * sz * c.w3);
    poly.push_back({p.x(), p.z()});
  }
  if (polygon_area(poly) < 0.0) std::reverse(poly.begin(), poly.end());
  return poly;
}

/// Sutherland–Hodgman clipping of `subject` against the convex CCW polygon `clip`.
inline std::vector<Pt> clip_convex(std::vector<Pt> subject, const std::vector<Pt>& clip) {
  for (std::size_t i = 0, n = clip.size(); i < n && !subject.empty(); ++i) {
    const Pt& a = clip[i];
    const Pt& b = clip[(i + 1) % n];
    std::vector<Pt> out;
    out.reserve(subject.size() + 2);
    for (std::size_t j = 0, m = subject.size(); j < m; ++j) {
      const Pt& s = subject[j];
      const Pt& e = subject[(j + 1) % m];
      const double ds = cross(a, b, s);
      const double de = cross(a, b, e);
      const bool s_in = ds >= 0.0;
      const bool e_in = de >= 0.0;
      if (s_in) out.push_back(s);
      if (s_in != e_in) {
        const double t = ds / (ds - de);
        out.push_back({s.x + t * (e.x - s.x), s.z + t * (e.z - s.z)});
      }
    }
    subject = std::move(out);
  }
  return subject;
}

inline double bev_intersection_area(const Cuboid3D& a, const Cuboid3D& b) {
  const auto poly = clip_convex(footprint(a), footprint(b));
  if (poly.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(poly));
}

}  // namespace detail

/// Rotated-rectangle IoU of the footprints in the XZ plane.
inline double iou_bev(const Cuboid3D& a, const Cuboid3D& b) {
  const double inter = detail::bev_intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.l3 * a.w3 + b.l3 * b.w3 - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

inline double iou_3d(const Cuboid3D& a, const Cuboid3D& b) {
  const double y_overlap =
      std::min(a.y + 0.5 * a.h3, b.y + 0.5 * b.h3) - std::max(a.y - 0.5 * a.h3, b.y - 0.5 * b.h3);
  if (y_overlap <= 0.0) return 0.0;
  const double inter = detail::bev_intersection_area(a, b) * y_overlap;
  if (inter <= 0.0) return 0.0;
  const double uni = a.l3 * a.w3 * a.h3 + b.l3 * b.w3 * b.h3 - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

}  // namespace kin3d
