#include <gtest/gtest.h>

#include <cmath>

#include "kin3d/sim.hpp"

using namespace kin3d;

TEST(Simulate, ZeroNoiseDetectionsEqualTruth) {
  ScenarioSpec spec;
  spec.seed = 9;
  const SimResult sim = simulate(spec);
  int seen = 0;
  for (const auto& f : sim.frames) {
    ASSERT_EQ(f.detections.size(), f.gts.size());
    for (std::size_t k = 0; k < f.gts.size(); ++k) {
      const auto& d = f.detections[k].det;
      const auto& g = f.gts[k];
      EXPECT_EQ(f.detections[k].gt_id, g.track_id);
      EXPECT_EQ(d.cuboid.center(), g.cuboid.center());
      EXPECT_EQ(d.cuboid.theta, g.cuboid.theta);
      EXPECT_EQ(d.box2d.x, g.box2d.x);
      EXPECT_EQ(d.omega, 1.0);
      ++seen;
    }
  }
  EXPECT_GT(seen, 400);
}

TEST(Simulate, SameSeedSameOutput) {
  ScenarioSpec spec;
  spec.seed = 17;
  spec.noise.sigma_center = 0.4;
  spec.ego = {Vec3(0, 0, -0.3), Vec3(0, 0.01, 0)};
  const SimResult a = simulate(spec), b = simulate(spec);
  ASSERT_EQ(a.frames.size(), b.frames.size());
  for (std::size_t f = 0; f < a.frames.size(); ++f) {
    ASSERT_EQ(a.frames[f].detections.size(), b.frames[f].detections.size());
    for (std::size_t k = 0; k < a.frames[f].detections.size(); ++k) {
      EXPECT_EQ(a.frames[f].detections[k].det.cuboid.center(), b.frames[f].detections[k].det.cuboid.center());
      EXPECT_EQ(a.frames[f].detections[k].det.mu, b.frames[f].detections[k].det.mu);
    }
  }
  spec.seed = 18;
  EXPECT_NE(simulate(spec).frames[0].detections[0].det.cuboid.x, a.frames[0].detections[0].det.cuboid.x);
}

TEST(Simulate, CenterNoiseHasRequestedSpread) {
  ScenarioSpec spec;
  spec.objects.assign(50, ObjectInit{});
  for (std::size_t k = 0; k < spec.objects.size(); ++k) spec.objects[k].center = Vec3(-5.0 + 0.2 * k, 1.0, 25.0);
  spec.n_frames = 70;
  spec.noise.sigma_center = 0.3;
  double sum = 0, sq = 0;
  long n = 0;
  for (const auto& f : simulate(spec).frames)
    for (const auto& d : f.detections)
      for (int a = 0; a < 3; ++a) {
        sum += d.center_noise[a];
        sq += d.center_noise[a] * d.center_noise[a];
        ++n;
      }
  ASSERT_GE(n, 10000);
  const double mean = sum / n, sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(sd, 0.3, 0.3 * 0.05);
}

TEST(Simulate, ConfidenceEncodesNoise) {
  ScenarioSpec spec;
  spec.seed = 4;
  spec.noise.sigma_center = 0.5;
  for (const auto& f : simulate(spec).frames)
    for (const auto& d : f.detections) {
      ASSERT_GT(d.det.omega, 0.0);
      ASSERT_LE(d.det.omega, 1.0);
      const double q = d.center_noise.norm() / 0.5;
      ASSERT_NEAR(d.det.omega, std::exp(-0.5 * q * q), 1e-15);
      ASSERT_NEAR(d.det.mu, d.det.score * d.det.omega, 1e-15);
      ASSERT_GE(d.det.score, 0.5);
      ASSERT_LE(d.det.score, 1.0);
    }
}

TEST(Simulate, ObjectsMoveAlongHeading) {
  ScenarioSpec spec;
  ObjectInit o;
  o.center = Vec3(0, 1, 20);
  o.yaw = 0.3;
  o.speed = 0.8;
  spec.objects = {o};
  spec.n_frames = 5;
  const SimResult sim = simulate(spec);
  for (int f = 0; f < 5; ++f) {
    ASSERT_EQ(sim.frames[f].gts.size(), 1u);
    const Vec3 expected = o.center + f * 0.8 * Vec3(std::cos(0.3), 0, -std::sin(0.3));
    EXPECT_LT((sim.frames[f].gts[0].cuboid.center() - expected).norm(), 1e-12);
  }
}

TEST(Simulate, BoxesAreClippedToImage) {
  ScenarioSpec spec;
  ObjectInit edge, behind, inside;
  edge.center = Vec3(-9.5, 1, 12);
  behind.center = Vec3(0, 1, -5);
  inside.center = Vec3(0, 1, 20);
  spec.objects = {edge, behind, inside};
  spec.n_frames = 1;
  const SimFrame f = simulate(spec).frames[0];
  ASSERT_EQ(f.gts.size(), 2u);
  for (const auto& g : f.gts) {
    EXPECT_GE(g.box2d.x, 0.0);
    EXPECT_GE(g.box2d.y, 0.0);
    EXPECT_LE(g.box2d.right(), spec.image_width);
    EXPECT_LE(g.box2d.bottom(), spec.image_height);
  }
  EXPECT_GT(f.gts[0].truncation, 0.0);
  EXPECT_LT(f.gts[0].truncation, 1.0);
  EXPECT_EQ(f.gts[1].truncation, 0.0);
}

TEST(Simulate, Validation) {
  ScenarioSpec spec;
  spec.n_frames = 0;
  EXPECT_THROW(simulate(spec), Error);
  spec = {};
  spec.noise.sigma_center = -1;
  EXPECT_THROW(simulate(spec), Error);
  spec = {};
  spec.noise.score_min = 0.9;
  spec.noise.score_max = 0.8;
  EXPECT_THROW(simulate(spec), Error);
}

TEST(Simulate, SequenceViewKeepsFramesAndScores) {
  ScenarioSpec spec;
  spec.seed = 2;
  spec.noise.sigma_center = 0.2;
  const SimResult sim = simulate(spec);
  const Sequence seq = to_sequence(sim);
  ASSERT_EQ(seq.size(), sim.frames.size());
  for (std::size_t f = 0; f < seq.size(); ++f) {
    ASSERT_EQ(seq[f].measurements.size(), sim.frames[f].detections.size());
    for (std::size_t k = 0; k < seq[f].measurements.size(); ++k)
      EXPECT_EQ(seq[f].measurements[k].mu, sim.frames[f].detections[k].det.mu);
    ASSERT_EQ(seq[f].gts.size(), sim.frames[f].gts.size());
  }
}
