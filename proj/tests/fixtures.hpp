#pragma once

#include <cstdint>
#include <vector>

#include "kin3d/eval.hpp"
#include "kin3d/sim.hpp"

namespace fixture {

/// Forecasting scenario: 8 cars ahead of a camera driving forward 0.5 m/frame.
/// Seeds from 1000 upward are kept when every car stays fully inside the image
/// for all 16 frames, until `count` sequences are collected.
inline std::vector<kin3d::Sequence> forecast_sequences(double sigma_center, std::size_t count = 60) {
  std::vector<kin3d::Sequence> out;
  for (std::uint64_t s = 0; out.size() < count; ++s) {
    kin3d::ScenarioSpec spec;
    spec.seed = 1000 + s;
    spec.n_objects = 8;
    spec.n_frames = 16;
    spec.noise.sigma_center = sigma_center;
    spec.spawn_x = 6;
    spec.spawn_z_min = 25;
    spec.spawn_z_max = 45;
    spec.speed_max = 1.0;
    spec.ego.gamma = {0, 0, -0.5};
    const auto sim = kin3d::simulate(spec);
    bool complete = true;
    for (const auto& f : sim.frames) {
      if (f.gts.size() != 8) complete = false;
      for (const auto& g : f.gts)
        if (g.truncation > 0) complete = false;
    }
    if (complete) out.push_back(kin3d::to_sequence(sim));
  }
  return out;
}

inline constexpr int kForecastHistory = 10;

/// Detections of a simulation as evaluation records ranked by the fused score.
inline void flatten(const kin3d::SimResult& sim, std::vector<kin3d::EvalDetection>& dets,
                    std::vector<kin3d::EvalGroundTruth>& gts) {
  for (const auto& f : sim.frames) {
    for (const auto& d : f.detections)
      dets.push_back({f.index, d.det.cuboid, d.det.box2d, d.det.mu, d.det.score, d.det.mu});
    for (const auto& g : f.gts) gts.push_back({f.index, g.cuboid, g.box2d, g.occlusion, g.truncation});
  }
}

}  // namespace fixture
