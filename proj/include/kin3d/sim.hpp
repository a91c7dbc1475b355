#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "kin3d/detection.hpp"
#include "kin3d/ego_motion.hpp"
#include "kin3d/eval.hpp"
#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"

namespace kin3d {

/// KITTI-like pinhole camera (focal length and principal point of the left color camera).
inline CalibProjection kitti_like_calib() { return CalibProjection::pinhole(721.5377, 609.5593, 172.854); }

struct ObjectInit {
  Vec3 center{0.0, 0.9, 20.0};
  double yaw = 0.0;    // [-pi, pi)
  double speed = 0.0;  // meters per frame along the heading
  double w3 = 1.6, h3 = 1.5, l3 = 3.9;
};

struct NoiseModel {
  double sigma_center = 0.0;  // per axis, meters
  double sigma_dims = 0.0;
  double sigma_yaw = 0.0;
  double score_min = 0.5;  // class score c ~ U[score_min, score_max]
  double score_max = 1.0;
};

struct ScenarioSpec {
  int n_objects = 20;
  int n_frames = 40;
  std::uint64_t seed = 0;
  std::vector<ObjectInit> objects;  // drawn from the seed when empty
  EgoMotion ego;                    // applied every frame after the first
  std::vector<EgoMotion> ego_per_frame;  // overrides `ego` when non-empty; entry 0 is unused
  NoiseModel noise;
  CalibProjection calib = kitti_like_calib();
  double image_width = 1242.0;  // projected boxes are clipped to the image
  double image_height = 375.0;
  double min_depth = 1.0;  // nearer objects are not visible

  // spawn ranges for drawn objects
  double spawn_x = 12.0;
  double spawn_z_min = 12.0;
  double spawn_z_max = 45.0;
  double speed_max = 1.5;

  void validate() const {
    if (n_frames < 1) throw Error(Errc::RangeError, "n_frames must be at least 1");
    if (objects.empty() && n_objects < 0) throw Error(Errc::RangeError, "n_objects must be non-negative");
    if (!ego_per_frame.empty() && static_cast<int>(ego_per_frame.size()) != n_frames)
      throw Error(Errc::RangeError, "ego_per_frame needs one entry per frame");
    if (noise.sigma_center < 0 || noise.sigma_dims < 0 || noise.sigma_yaw < 0)
      throw Error(Errc::RangeError, "noise levels must be non-negative");
    if (!(noise.score_min >= 0 && noise.score_min <= noise.score_max && noise.score_max <= 1))
      throw Error(Errc::RangeError, "score range must lie in [0, 1]");
    if (!(image_width > 0 && image_height > 0)) throw Error(Errc::RangeError, "image size must be positive");
    calib.validate();
  }
};

struct SimDetection {
  Detection det;
  int gt_id = -1;
  Vec3 center_noise = Vec3::Zero();
};

struct SimFrame {
  int index = 0;
  EgoMotion ego;                 // maps the previous frame into this one
  std::vector<LabeledBox> gts;   // visible objects only
  std::vector<double> gt_speeds;  // parallel to gts, meters per frame
  std::vector<SimDetection> detections;
};

struct SimResult {
  CalibProjection calib;
  std::vector<SimFrame> frames;
};

struct ClippedBox {
  Box2D box;
  double truncation;  // fraction of the projected box outside the image
};

/// Projected box clipped to the image; nothing when it misses the image or lies too close.
inline std::optional<ClippedBox> visible_box(const Cuboid3D& c, const ScenarioSpec& spec) {
  if (c.z < spec.min_depth) return std::nullopt;
  Box2D full;
  try {
    full = project_cuboid_to_box2d(c, spec.calib);
  } catch (const Error&) {
    return std::nullopt;
  }
  const double x0 = std::max(full.x, 0.0), y0 = std::max(full.y, 0.0);
  const double x1 = std::min(full.right(), spec.image_width), y1 = std::min(full.bottom(), spec.image_height);
  if (!(x1 > x0 && y1 > y0)) return std::nullopt;
  const Box2D clipped{x0, y0, x1 - x0, y1 - y0};
  return ClippedBox{clipped, std::clamp(1.0 - clipped.area() / full.area(), 0.0, 1.0)};
}

/// Ground truth and noisy detections for a scenario.
///
/// Objects move speed·[cos θ, 0, -sin θ] per frame, then the camera motion
/// maps them into the new frame. Objects whose clipped box misses the image
/// are left out of that frame. Detection confidence is
/// ω = exp(-(|n| / σ_center)² / 2) for the injected center noise n.
inline SimResult simulate(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 world_rng(spec.seed);
  std::mt19937_64 noise_rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);

  struct Obj {
    Cuboid3D box;
    double speed;
  };
  std::vector<Obj> objs;
  if (!spec.objects.empty()) {
    for (const auto& o : spec.objects)
      objs.push_back({{o.center.x(), o.center.y(), o.center.z(), o.w3, o.h3, o.l3, wrap_angle(o.yaw)}, o.speed});
  } else {
    std::uniform_real_distribution<double> ux(-spec.spawn_x, spec.spawn_x);
    std::uniform_real_distribution<double> uz(spec.spawn_z_min, spec.spawn_z_max);
    std::uniform_real_distribution<double> uyaw(-kPi, kPi);
    std::uniform_real_distribution<double> uspeed(0.0, spec.speed_max);
    std::normal_distribution<double> dim_jitter(0.0, 0.1);
    for (int k = 0; k < spec.n_objects; ++k) {
      Obj o;
      o.box.x = ux(world_rng);
      o.box.z = uz(world_rng);
      o.box.theta = wrap_angle(uyaw(world_rng));
      o.speed = uspeed(world_rng);
      o.box.w3 = 1.6 + dim_jitter(world_rng);
      o.box.h3 = 1.5 + dim_jitter(world_rng);
      o.box.l3 = 3.9 + 2.0 * dim_jitter(world_rng);
      o.box.y = 1.65 - 0.5 * o.box.h3;
      objs.push_back(o);
    }
  }

  const NoiseModel& nm = spec.noise;
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  SimResult out;
  out.calib = spec.calib;
  for (int f = 0; f < spec.n_frames; ++f) {
    SimFrame frame;
    frame.index = f;
    if (f > 0) {
      frame.ego = spec.ego_per_frame.empty() ? spec.ego : spec.ego_per_frame[f];
      const Mat3 r = rotation_from_euler(frame.ego.rho);
      for (auto& o : objs) {
        const double c = std::cos(o.box.theta), s = std::sin(o.box.theta);
        const Vec3 moved = o.box.center() + o.speed * Vec3(c, 0.0, -s);
        const Vec3 p = r * moved + frame.ego.gamma;
        o.box.x = p.x();
        o.box.y = p.y();
        o.box.z = p.z();
        o.box.theta = wrap_angle(o.box.theta + frame.ego.rho.y());
      }
    }

    for (std::size_t id = 0; id < objs.size(); ++id) {
      const Obj& o = objs[id];
      const auto vis = visible_box(o.box, spec);
      if (!vis) continue;
      LabeledBox gt;
      gt.track_id = static_cast<int>(id);
      gt.cuboid = o.box;
      gt.box2d = vis->box;
      gt.truncation = vis->truncation;
      frame.gts.push_back(gt);
      frame.gt_speeds.push_back(o.speed);

      SimDetection sd;
      sd.gt_id = static_cast<int>(id);
      sd.center_noise = nm.sigma_center * Vec3(n01(noise_rng), n01(noise_rng), n01(noise_rng));
      Cuboid3D noisy = o.box;
      noisy.x += sd.center_noise.x();
      noisy.y += sd.center_noise.y();
      noisy.z += sd.center_noise.z();
      noisy.w3 = std::max(0.1, noisy.w3 + nm.sigma_dims * n01(noise_rng));
      noisy.h3 = std::max(0.1, noisy.h3 + nm.sigma_dims * n01(noise_rng));
      noisy.l3 = std::max(0.1, noisy.l3 + nm.sigma_dims * n01(noise_rng));
      noisy.theta = wrap_angle(noisy.theta + nm.sigma_yaw * n01(noise_rng));
      const double c = nm.score_min + (nm.score_max - nm.score_min) * u01(noise_rng);
      double omega = 1.0;
      if (nm.sigma_center > 0.0) {
        const double q = sd.center_noise.norm() / nm.sigma_center;
        omega = std::exp(-0.5 * q * q);
      }
      const auto noisy_vis = visible_box(noisy, spec);
      if (!noisy_vis) continue;
      sd.det = Detection::make("Car", c, omega, noisy_vis->box, noisy);
      frame.detections.push_back(sd);
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

/// Tracker-ready view of a simulation.
inline Sequence to_sequence(const SimResult& sim) {
  Sequence seq;
  for (const auto& f : sim.frames) {
    SequenceFrame sf;
    sf.ego = f.ego;
    for (const auto& d : f.detections) sf.measurements.push_back(to_measurement(d.det));
    for (const auto& g : f.gts) sf.gts.push_back({f.index, g.cuboid, g.box2d, g.occlusion, g.truncation});
    seq.push_back(std::move(sf));
  }
  return seq;
}

}  // namespace kin3d
