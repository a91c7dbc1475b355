#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kin3d/ego_motion.hpp"
#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"
#include "kin3d/orientation.hpp"

namespace kin3d {

using State9 = Eigen::Matrix<double, 9, 1>;
using Cov9 = Eigen::Matrix<double, 9, 9>;
using Meas8 = Eigen::Matrix<double, 8, 1>;

/// Track state layout: center, dimensions, half-turn yaw, heading, speed along the heading.
enum StateIndex : int { kX = 0, kY, kZ, kW, kH, kL, kTheta, kHeading, kVel };

inline constexpr double kMetersPerSecondToMph = 1.0 / 0.44704;

struct TrackerConfig {
  double lambda_o = 0.2;  // uncertainty weighting of confidence-driven covariances
  double k_d = 0.5;       // stage-1 center distance gate, meters
  double k_u = 0.35;      // stage-2 projected 2D IoU gate
  double k_p = 0.75;      // confidence penalty for unmatched tracks
  double k_m = 0.05;      // tracks at or below this confidence are removed
  double frame_rate = 10.0;

  void validate() const {
    if (!(lambda_o > 0.0) || !std::isfinite(lambda_o)) throw Error(Errc::RangeError, "lambda_o must be positive");
    if (!(k_d > 0.0) || !std::isfinite(k_d)) throw Error(Errc::RangeError, "k_d must be positive");
    if (!(k_u > 0.0 && k_u <= 1.0)) throw Error(Errc::RangeError, "k_u must lie in (0, 1]");
    if (!(k_p >= 0.0 && k_p <= 1.0)) throw Error(Errc::RangeError, "k_p must lie in [0, 1]");
    if (!(k_m >= 0.0 && k_m < 1.0)) throw Error(Errc::RangeError, "k_m must lie in [0, 1)");
    if (!(frame_rate > 0.0) || !std::isfinite(frame_rate)) throw Error(Errc::RangeError, "frame_rate must be positive");
  }
};

/// One measured box: [x y z w h l theta theta_h] with theta in [-pi/2, pi/2).
struct Measurement {
  Meas8 b = Meas8::Zero();
  double mu = 1.0;
  std::optional<Box2D> box2d;

  static Measurement from_cuboid(const Cuboid3D& c, double mu, std::optional<Box2D> box = std::nullopt) {
    const MeasurementYaw yaw = measurement_theta_split(c.theta);
    Measurement m;
    m.b << c.x, c.y, c.z, c.w3, c.h3, c.l3, yaw.tau_theta, static_cast<double>(yaw.theta_h);
    m.mu = mu;
    m.box2d = box;
    return m;
  }

  Vec3 center() const { return b.head<3>(); }
};

struct TrackState {
  State9 state = State9::Zero();
  Cov9 cov = Cov9::Identity();
  double mu = 1.0;
  std::int64_t id = 0;
  int age = 0;
  bool coasting = false;
  std::vector<State9> history;

  Vec3 center() const { return state.head<3>(); }

  /// Full-circle yaw recovered from the half-turn yaw and the rounded heading.
  double yaw() const { return measurement_theta_merge(state[kTheta], state[kHeading]); }

  Cuboid3D cuboid() const {
    return {state[kX], state[kY], state[kZ], state[kW], state[kH], state[kL], yaw()};
  }
};

inline double velocity_to_mph(double v, double frame_rate) {
  if (!(frame_rate > 0.0)) throw Error(Errc::RangeError, "frame_rate must be positive");
  return v * frame_rate * kMetersPerSecondToMph;
}

inline void symmetrize(Cov9& p) { p = 0.5 * (p + p.transpose()).eval(); }

/// Identity with the speed column moving the center along the heading.
inline Cov9 build_F(const State9& s) {
  Cov9 f = Cov9::Identity();
  const double heading = s[kTheta] + kPi * (std::round(s[kHeading]) >= 1.0 ? 1.0 : 0.0);
  f(kX, kVel) = std::cos(heading);
  f(kZ, kVel) = -std::sin(heading);
  return f;
}

inline Cov9 build_F(const TrackState& t) { return build_F(t.state); }

/// Motion-model forecast followed by ego compensation of center and yaw.
inline TrackState forecast(const TrackState& track, const EgoMotion& ego) {
  TrackState out = track;
  const Cov9 f = build_F(track.state);
  out.state = f * track.state;
  out.cov = f * track.cov * f.transpose() + Cov9::Identity() * (1.0 - track.mu);
  symmetrize(out.cov);

  const EgoCompensated c = apply_ego_to_track(out.center(), out.state[kTheta], ego);
  out.state.head<3>() = c.center;
  out.state[kTheta] = c.theta;
  if (c.heading_flip) out.state[kHeading] = 1.0 - out.state[kHeading];
  return out;
}

/// Applies `forecast` n_f times with the same ego-motion and no updates.
inline std::vector<TrackState> forecast_n(std::span<const TrackState> tracks, int n_f, const EgoMotion& ego) {
  if (n_f < 0) throw Error(Errc::RangeError, "forecast horizon must be non-negative");
  std::vector<TrackState> out(tracks.begin(), tracks.end());
  for (int k = 0; k < n_f; ++k)
    for (auto& t : out) t = forecast(t, ego);
  return out;
}

/// New track from an unmatched measurement: zero speed, P = I·(1 - mu)·lambda_o.
inline TrackState birth(const Measurement& m, std::int64_t id, const TrackerConfig& cfg) {
  TrackState t;
  t.state.head<8>() = m.b;
  t.state[kVel] = 0.0;
  t.cov = Cov9::Identity() * (1.0 - m.mu) * cfg.lambda_o;
  t.mu = m.mu;
  t.id = id;
  t.age = 1;
  return t;
}

/// Kalman update of a forecast track with an associated measurement.
inline TrackState update(const TrackState& pred, const Measurement& m, const TrackerConfig& cfg) {
  using Mat8 = Eigen::Matrix<double, 8, 8>;

  Meas8 residual = m.b - pred.state.head<8>();
  // Yaw lives on a half-turn circle; a pi shift of the residual swaps the measured heading.
  const HalfTurnWrap yaw = wrap_half_turn(m.b[kTheta] - pred.state[kTheta]);
  residual[kTheta] = yaw.angle;
  const double measured_heading = yaw.flipped ? 1.0 - m.b[kHeading] : m.b[kHeading];
  residual[kHeading] = measured_heading - pred.state[kHeading];

  const Mat8 s = pred.cov.topLeftCorner<8, 8>() + Mat8::Identity() * (1.0 - m.mu) * cfg.lambda_o;
  const Eigen::SelfAdjointEigenSolver<Mat8> eig(s, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > 1e12) throw Error(Errc::SingularInnovation, "innovation covariance is singular");

  // K = P'Hᵀ S⁻¹; with H = [I 0], P'Hᵀ is the first eight columns of P'.
  const Eigen::Matrix<double, 9, 8> pht = pred.cov.leftCols<8>();
  const Eigen::Matrix<double, 9, 8> k = s.ldlt().solve(pht.transpose()).transpose();

  TrackState out = pred;
  out.state = pred.state + k * residual;
  Cov9 ikh = Cov9::Identity();
  ikh.leftCols<8>() -= k;
  out.cov = ikh * pred.cov;
  symmetrize(out.cov);

  const HalfTurnWrap wrapped = wrap_half_turn(out.state[kTheta]);
  out.state[kTheta] = wrapped.angle;
  if (wrapped.flipped) out.state[kHeading] = 1.0 - out.state[kHeading];
  out.state[kHeading] = std::clamp(out.state[kHeading], 0.0, 1.0);
  for (int d : {kW, kH, kL}) out.state[d] = std::max(out.state[d], 1e-3);

  out.mu = 0.5 * (pred.mu + m.mu);
  out.coasting = false;
  return out;
}

// ---------------------------------------------------------------------------
// Association
// ---------------------------------------------------------------------------

struct Association {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (track index, measurement index)
  std::vector<std::size_t> new_measurements;
  std::vector<std::size_t> unmatched_tracks;
};

namespace detail {

struct Candidate {
  double key;  // smaller is better
  std::int64_t track_id;
  std::size_t track;
  std::size_t meas;
};

/// Repeatedly takes the best remaining candidate whose track and measurement are both free.
inline void greedy_take(std::vector<Candidate>& cands, std::vector<bool>& track_used, std::vector<bool>& meas_used,
                        std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(a.key, a.track_id, a.meas) < std::tie(b.key, b.track_id, b.meas);
  });
  for (const Candidate& c : cands) {
    if (track_used[c.track] || meas_used[c.meas]) continue;
    track_used[c.track] = true;
    meas_used[c.meas] = true;
    pairs.emplace_back(c.track, c.meas);
  }
}

}  // namespace detail

/// Two-stage greedy association.
///
/// Stage 1 pairs by ascending 3D center distance while the distance is at most
/// k_d. Stage 2 pairs the remainders by descending IoU between the track's
/// projected cuboid and the measured 2D box while the IoU is at least k_u; it
/// needs a calibration and is skipped without one. Ties go to the lower track
/// id, then the lower measurement index.
inline Association associate(std::span<const TrackState> tracks, std::span<const Measurement> meas,
                             const TrackerConfig& cfg, const std::optional<CalibProjection>& calib) {
  Association out;
  std::vector<bool> track_used(tracks.size(), false);
  std::vector<bool> meas_used(meas.size(), false);

  std::vector<detail::Candidate> cands;
  for (std::size_t t = 0; t < tracks.size(); ++t)
    for (std::size_t j = 0; j < meas.size(); ++j) {
      const double d = (tracks[t].center() - meas[j].center()).norm();
      if (d <= cfg.k_d) cands.push_back({d, tracks[t].id, t, j});
    }
  detail::greedy_take(cands, track_used, meas_used, out.pairs);

  if (calib) {
    std::vector<std::optional<Box2D>> track_boxes(tracks.size());
    std::vector<std::optional<Box2D>> meas_boxes(meas.size());
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (track_used[t]) continue;
      try {
        track_boxes[t] = project_cuboid_to_box2d(tracks[t].cuboid(), *calib);
      } catch (const Error&) {
      }
    }
    for (std::size_t j = 0; j < meas.size(); ++j) {
      if (meas_used[j]) continue;
      if (meas[j].box2d) {
        meas_boxes[j] = meas[j].box2d;
        continue;
      }
      const Cuboid3D c{meas[j].b[kX], meas[j].b[kY], meas[j].b[kZ], meas[j].b[kW], meas[j].b[kH], meas[j].b[kL],
                       measurement_theta_merge(meas[j].b[kTheta], meas[j].b[kHeading])};
      try {
        meas_boxes[j] = project_cuboid_to_box2d(c, *calib);
      } catch (const Error&) {
      }
    }
    cands.clear();
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (!track_boxes[t]) continue;
      for (std::size_t j = 0; j < meas.size(); ++j) {
        if (!meas_boxes[j]) continue;
        const double iou = iou_2d(*track_boxes[t], *meas_boxes[j]);
        if (iou >= cfg.k_u) cands.push_back({-iou, tracks[t].id, t, j});
      }
    }
    detail::greedy_take(cands, track_used, meas_used, out.pairs);
  }

  for (std::size_t j = 0; j < meas.size(); ++j)
    if (!meas_used[j]) out.new_measurements.push_back(j);
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (!track_used[t]) out.unmatched_tracks.push_back(t);
  return out;
}

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

/// Track lifecycle for one sequence. Not thread-safe; use one instance per sequence.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}, std::optional<CalibProjection> calib = std::nullopt)
      : cfg_(cfg), calib_(std::move(calib)) {
    cfg_.validate();
    if (calib_) calib_->validate();
  }

  /// forecast -> associate -> update, then penalize, prune and spawn tracks.
  const std::vector<TrackState>& step(std::span<const Measurement> meas, const EgoMotion& ego) {
    for (const Measurement& m : meas) {
      if (!m.b.allFinite()) throw Error(Errc::UnitError, "measurement has non-finite entries");
      if (!(m.mu >= 0.0 && m.mu <= 1.0)) throw Error(Errc::RangeError, "measurement confidence outside [0, 1]");
    }

    for (auto& t : tracks_) t = forecast(t, ego);
    last_ego_ = ego;

    const Association a = associate(tracks_, meas, cfg_, calib_);
    for (const auto& [t, j] : a.pairs) tracks_[t] = update(tracks_[t], meas[j], cfg_);
    for (std::size_t t : a.unmatched_tracks) {
      tracks_[t].mu *= cfg_.k_p;
      tracks_[t].coasting = true;
    }

    std::erase_if(tracks_, [&](const TrackState& t) { return t.mu <= cfg_.k_m; });
    for (auto& t : tracks_) ++t.age;

    for (std::size_t j : a.new_measurements) tracks_.push_back(birth(meas[j], next_id_++, cfg_));

    for (auto& t : tracks_) t.history.push_back(t.state);
    ++frame_;
    return tracks_;
  }

  /// Tracks advanced n_f frames with the last ego-motion held fixed.
  std::vector<TrackState> forecast_n(int n_f) const { return kin3d::forecast_n(tracks_, n_f, last_ego_); }

  const std::vector<TrackState>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return cfg_; }
  const std::optional<CalibProjection>& calibration() const { return calib_; }
  int frames_processed() const { return frame_; }

 private:
  TrackerConfig cfg_;
  std::optional<CalibProjection> calib_;
  std::vector<TrackState> tracks_;
  std::int64_t next_id_ = 0;
  EgoMotion last_ego_;
  int frame_ = 0;
};

}  // namespace kin3d
