#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kin3d/geometry.hpp"
#include "kin3d/losses.hpp"
#include "kin3d/tracker.hpp"

namespace kin3d {

/// One measured box with its class score c, 3D confidence omega and fused score mu = c·omega.
struct Detection {
  std::string label = "Car";
  double score = 1.0;
  double omega = 1.0;
  double mu = 1.0;
  Box2D box2d;
  Cuboid3D cuboid;

  static Detection make(std::string label, double c, double omega, const Box2D& box, const Cuboid3D& cuboid) {
    return {std::move(label), c, omega, fuse_score(c, omega), box, cuboid};
  }
};

inline Measurement to_measurement(const Detection& d) { return Measurement::from_cuboid(d.cuboid, d.mu, d.box2d); }

inline std::vector<Measurement> to_measurements(const std::vector<Detection>& dets) {
  std::vector<Measurement> out;
  out.reserve(dets.size());
  for (const auto& d : dets) out.push_back(to_measurement(d));
  return out;
}

/// Labelled ground-truth object of one frame.
struct LabeledBox {
  int track_id = -1;
  std::string label = "Car";
  Cuboid3D cuboid;
  Box2D box2d;
  int occlusion = 0;
  double truncation = 0.0;
};

/// All inputs of one frame.
struct FrameRecord {
  int frame = 0;
  std::vector<Detection> detections;
  std::optional<EgoMotion> ego;
  std::vector<LabeledBox> gts;
};

}  // namespace kin3d
