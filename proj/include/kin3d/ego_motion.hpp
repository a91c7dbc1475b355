#pragma once

#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"

namespace kin3d {

/// Dense ego-motion predictions with a spatial confidence map (pre-softmax logits).
struct EgoMaps {
  std::array<Eigen::ArrayXXd, 3> gamma;  // Γx, Γy, Γz
  std::array<Eigen::ArrayXXd, 3> rho;    // Px, Py, Pz
  Eigen::ArrayXXd conf;                  // Ec

  void validate() const {
    if (conf.size() == 0) throw Error(Errc::RangeError, "ego maps are empty");
    for (const auto* set : {&gamma, &rho})
      for (const auto& m : *set) {
        if (m.rows() != conf.rows() || m.cols() != conf.cols())
          throw Error(Errc::RangeError, "ego maps must share dimensions");
        if (!m.allFinite()) throw Error(Errc::UnitError, "ego map has non-finite entries");
      }
    if (!conf.allFinite()) throw Error(Errc::UnitError, "confidence map has non-finite entries");
  }
};

/// Softmax over the spatial confidence, then a weighted sum of every channel.
inline EgoMotion pool_ego(const EgoMaps& maps) {
  maps.validate();
  Eigen::ArrayXXd w = (maps.conf - maps.conf.maxCoeff()).exp();
  w /= w.sum();
  EgoMotion out;
  for (int k = 0; k < 3; ++k) {
    out.gamma[k] = (maps.gamma[k] * w).sum();
    out.rho[k] = (maps.rho[k] * w).sum();
  }
  return out;
}

struct EgoCompensated {
  Vec3 center;
  double theta;       // in [-pi/2, pi/2)
  bool heading_flip;  // the caller toggles its heading state when set
};

/// center' = R(rho)·center + gamma; theta' = theta + rho_y wrapped to the half-turn range.
inline EgoCompensated apply_ego_to_track(const Vec3& center, double theta, const EgoMotion& ego) {
  const Vec3 c = rotation_from_euler(ego.rho) * center + ego.gamma;
  const HalfTurnWrap w = wrap_half_turn(theta + ego.rho.y());
  return {c, w.angle, w.flipped};
}

/// The motion mapping frame t coordinates back into frame t-1.
inline EgoMotion inverse(const EgoMotion& ego) {
  const Mat3 rt = rotation_from_euler(ego.rho).transpose();
  return {-(rt * ego.gamma), euler_from_rotation(rt)};
}

/// Motion of `first` followed by `second`.
inline EgoMotion compose(const EgoMotion& first, const EgoMotion& second) {
  const Mat3 r2 = rotation_from_euler(second.rho);
  const Mat3 r = r2 * rotation_from_euler(first.rho);
  return {r2 * first.gamma + second.gamma, euler_from_rotation(r)};
}

}  // namespace kin3d
