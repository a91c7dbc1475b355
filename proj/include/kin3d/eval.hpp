#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kin3d/ego_motion.hpp"
#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"
#include "kin3d/tracker.hpp"

namespace kin3d {

enum class Difficulty { all, easy, moderate, hard };

inline std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::all: return "all";
    case Difficulty::easy: return "easy";
    case Difficulty::moderate: return "moderate";
    case Difficulty::hard: return "hard";
  }
  return "all";
}

/// KITTI devkit difficulty limits.
struct DifficultyLimits {
  double min_height;
  int max_occlusion;
  double max_truncation;
};

inline DifficultyLimits limits_of(Difficulty d) {
  switch (d) {
    case Difficulty::easy: return {40.0, 0, 0.15};
    case Difficulty::moderate: return {25.0, 1, 0.30};
    case Difficulty::hard: return {25.0, 2, 0.50};
    case Difficulty::all: break;
  }
  return {0.0, std::numeric_limits<int>::max(), std::numeric_limits<double>::infinity()};
}

struct EvalDetection {
  int frame = 0;
  Cuboid3D cuboid;
  Box2D box2d;
  double score = 1.0;        // ranking score
  double class_score = 1.0;  // c
  double fused = 1.0;        // mu
};

struct EvalGroundTruth {
  int frame = 0;
  Cuboid3D cuboid;
  Box2D box2d;
  int occlusion = 0;
  double truncation = 0.0;
};

enum class IouKind { two_d, bev, three_d };

inline std::string to_string(IouKind k) {
  switch (k) {
    case IouKind::two_d: return "2d";
    case IouKind::bev: return "bev";
    case IouKind::three_d: return "3d";
  }
  return "3d";
}

inline double box_iou(IouKind kind, const EvalDetection& d, const EvalGroundTruth& g) {
  switch (kind) {
    case IouKind::two_d: return iou_2d(d.box2d, g.box2d);
    case IouKind::bev: return iou_bev(d.cuboid, g.cuboid);
    case IouKind::three_d: return iou_3d(d.cuboid, g.cuboid);
  }
  return 0.0;
}

struct EvalConfig {
  std::vector<double> iou_thresholds{0.7, 0.5, 0.3};
  std::vector<Difficulty> difficulties{Difficulty::easy, Difficulty::moderate, Difficulty::hard};
  std::vector<double> depth_bins{15.0, 30.0, std::numeric_limits<double>::infinity()};
  int n_recall_points = 40;

  void validate() const {
    for (double t : iou_thresholds)
      if (!(t > 0.0 && t <= 1.0)) throw Error(Errc::RangeError, "IoU thresholds must lie in (0, 1]");
    for (std::size_t k = 0; k < depth_bins.size(); ++k) {
      if (!(depth_bins[k] > 0.0)) throw Error(Errc::RangeError, "depth bins must be positive");
      if (k > 0 && !(depth_bins[k] > depth_bins[k - 1])) throw Error(Errc::RangeError, "depth bins must ascend");
    }
    if (n_recall_points < 1) throw Error(Errc::RangeError, "n_recall_points must be positive");
  }
};

/// The part of the benchmark being scored. Ground truths outside it are ignored;
/// detections outside it count only when they match a cared-for ground truth.
struct EvalRegion {
  Difficulty difficulty = Difficulty::all;
  double max_depth = std::numeric_limits<double>::infinity();

  bool cares(const EvalGroundTruth& g) const {
    const DifficultyLimits l = limits_of(difficulty);
    return g.box2d.h2 >= l.min_height && g.occlusion <= l.max_occlusion && g.truncation <= l.max_truncation &&
           g.cuboid.z < max_depth;
  }
  bool contains(const EvalDetection& d) const {
    return d.box2d.h2 >= limits_of(difficulty).min_height && d.cuboid.z < max_depth;
  }
};

enum class MatchOutcome { true_positive, false_positive, ignored };

/// Detection indices by descending score; equal scores keep input order.
inline std::vector<std::size_t> score_order(std::span<const EvalDetection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

/// Greedy score-ordered matching within each frame. Each detection takes the
/// highest-IoU unmatched cared-for ground truth at or above the threshold.
/// Returned outcomes are indexed like `dets`.
template <class IouFn>
std::vector<MatchOutcome> match_detections(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts,
                                           IouFn&& iou, double threshold, const EvalRegion& region) {
  std::map<int, std::vector<std::size_t>> by_frame;
  for (std::size_t g = 0; g < gts.size(); ++g) by_frame[gts[g].frame].push_back(g);

  std::vector<bool> taken(gts.size(), false);
  std::vector<MatchOutcome> out(dets.size(), MatchOutcome::false_positive);
  for (std::size_t d : score_order(dets)) {
    const auto it = by_frame.find(dets[d].frame);
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    bool hits_ignored = false;
    if (it != by_frame.end()) {
      for (std::size_t g : it->second) {
        const double v = iou(dets[d], gts[g]);
        if (v < threshold) continue;
        if (!region.cares(gts[g])) {
          hits_ignored = true;
          continue;
        }
        if (!taken[g] && v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
    }
    if (best) {
      taken[*best] = true;
      out[d] = MatchOutcome::true_positive;
    } else if (hits_ignored || !region.contains(dets[d])) {
      out[d] = MatchOutcome::ignored;
    }
  }
  return out;
}

struct PRCurve {
  std::vector<double> scores;     // score at each operating point
  std::vector<double> recall;     // non-decreasing
  std::vector<double> precision;
  std::vector<double> sampled_recall;
  std::vector<double> sampled_precision;  // interpolated precision at each sampled recall
  std::size_t n_gt = 0;
  double ap = 0.0;
};

/// Max precision over operating points whose recall reaches each of k/n, k = 1..n.
inline void sample_interpolated(PRCurve& c, int n_points) {
  c.sampled_recall.clear();
  c.sampled_precision.clear();
  double sum = 0.0;
  for (int k = 1; k <= n_points; ++k) {
    const double r = static_cast<double>(k) / n_points;
    double p = 0.0;
    for (std::size_t i = 0; i < c.recall.size(); ++i)
      if (c.recall[i] >= r) p = std::max(p, c.precision[i]);
    c.sampled_recall.push_back(r);
    c.sampled_precision.push_back(p);
    sum += p;
  }
  c.ap = sum / n_points;
}

/// Precision/recall over the score ranking. Operating points sit at the end of
/// each group of equal scores, so the curve depends only on score order.
/// Returns nothing when the region holds no ground truth.
template <class IouFn>
std::optional<PRCurve> pr_curve(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts, IouFn&& iou,
                                double threshold, const EvalRegion& region = {}, int n_points = 40) {
  PRCurve c;
  c.n_gt = static_cast<std::size_t>(std::count_if(gts.begin(), gts.end(), [&](const auto& g) { return region.cares(g); }));
  if (c.n_gt == 0) return std::nullopt;

  const auto outcome = match_detections(dets, gts, iou, threshold, region);
  const auto order = score_order(dets);
  std::size_t tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t d = order[k];
    if (outcome[d] == MatchOutcome::true_positive) ++tp;
    if (outcome[d] == MatchOutcome::false_positive) ++fp;
    const bool group_end = k + 1 == order.size() || dets[order[k + 1]].score != dets[d].score;
    if (group_end && tp + fp > 0) {
      c.scores.push_back(dets[d].score);
      c.recall.push_back(static_cast<double>(tp) / static_cast<double>(c.n_gt));
      c.precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
  }
  sample_interpolated(c, n_points);
  return c;
}

template <class IouFn>
std::optional<double> ap40(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts, IouFn&& iou,
                           double threshold, Difficulty difficulty = Difficulty::all, int n_points = 40) {
  const auto c = pr_curve(dets, gts, iou, threshold, EvalRegion{difficulty}, n_points);
  if (!c) return std::nullopt;
  return c->ap;
}

inline std::optional<double> ap40(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts,
                                  IouKind kind, double threshold, Difficulty difficulty = Difficulty::all,
                                  int n_points = 40) {
  return ap40(
      dets, gts, [kind](const EvalDetection& d, const EvalGroundTruth& g) { return box_iou(kind, d, g); }, threshold,
      difficulty, n_points);
}

/// AP for the cumulative depth ranges [0, bin) of each bin.
inline std::vector<std::optional<double>> ap_by_depth(std::span<const EvalDetection> dets,
                                                      std::span<const EvalGroundTruth> gts, IouKind kind,
                                                      double threshold, std::span<const double> depth_bins,
                                                      Difficulty difficulty = Difficulty::all, int n_points = 40) {
  std::vector<std::optional<double>> out;
  for (double bin : depth_bins) {
    const auto c = pr_curve(
        dets, gts, [kind](const EvalDetection& d, const EvalGroundTruth& g) { return box_iou(kind, d, g); },
        threshold, EvalRegion{difficulty, bin}, n_points);
    out.push_back(c ? std::optional<double>(c->ap) : std::nullopt);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// One-to-one matches within each frame, by descending IoU, at or above `threshold`.
inline std::vector<std::pair<std::size_t, std::size_t>> match_by_iou(std::span<const EvalDetection> dets,
                                                                     std::span<const EvalGroundTruth> gts,
                                                                     IouKind kind, double threshold) {
  struct Cand {
    double iou;
    std::size_t d, g;
  };
  std::vector<Cand> cands;
  for (std::size_t d = 0; d < dets.size(); ++d)
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (dets[d].frame != gts[g].frame) continue;
      const double v = box_iou(kind, dets[d], gts[g]);
      if (v >= threshold && v > 0.0) cands.push_back({v, d, g});
    }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.iou > b.iou; });
  std::vector<bool> du(dets.size(), false), gu(gts.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const Cand& c : cands) {
    if (du[c.d] || gu[c.g]) continue;
    du[c.d] = gu[c.g] = true;
    out.emplace_back(c.d, c.g);
  }
  return out;
}

/// Mean |wrap(pred - gt)| in degrees over (pred, gt) yaw pairs.
inline double mean_angle_error(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw Error(Errc::EmptyMatchSet, "no matched pairs for angle error");
  double sum = 0.0;
  for (const auto& [pred, gt] : pairs) sum += std::abs(wrap_angle(pred - gt));
  return sum / static_cast<double>(pairs.size()) * 180.0 / kPi;
}

/// Angle error over detections matched to ground truths at BEV IoU >= 0.5.
inline double mean_angle_error(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts,
                               double bev_threshold = 0.5) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& [d, g] : match_by_iou(dets, gts, IouKind::bev, bev_threshold))
    pairs.emplace_back(dets[d].cuboid.theta, gts[g].cuboid.theta);
  return mean_angle_error(pairs);
}

struct SpeedSample {
  double estimated;  // meters per frame
  double truth;
};

inline double speed_mae_mph(std::span<const SpeedSample> samples, double frame_rate) {
  if (samples.empty()) throw Error(Errc::EmptyMatchSet, "no speed samples");
  double sum = 0.0;
  for (const auto& s : samples)
    sum += std::abs(velocity_to_mph(s.estimated, frame_rate) - velocity_to_mph(s.truth, frame_rate));
  return sum / static_cast<double>(samples.size());
}

struct MotionErrors {
  double velocity_mae_mph;
  double ego_mae_mph;
};

/// Object speed MAE and ego speed MAE (|gamma| per frame), both in MPH.
inline MotionErrors motion_errors(std::span<const SpeedSample> objects,
                                  std::span<const std::pair<EgoMotion, EgoMotion>> ego_est_gt, double frame_rate) {
  std::vector<SpeedSample> ego;
  ego.reserve(ego_est_gt.size());
  for (const auto& [est, gt] : ego_est_gt) ego.push_back({est.gamma.norm(), gt.gamma.norm()});
  return {speed_mae_mph(objects, frame_rate), speed_mae_mph(ego, frame_rate)};
}

struct GtTrackPoint {
  int id;
  Vec3 center;
};

/// Ground-truth speeds (m/frame) by central differences in the frame-f camera.
/// `egos[f]` maps frame f-1 into frame f. Objects missing a neighbour frame get no entry.
inline std::vector<std::map<int, double>> gt_speeds_central_difference(
    std::span<const std::vector<GtTrackPoint>> frames, std::span<const EgoMotion> egos) {
  if (egos.size() != frames.size()) throw Error(Errc::RangeError, "need one ego-motion per frame");
  std::vector<std::map<int, double>> out(frames.size());
  for (std::size_t f = 1; f + 1 < frames.size(); ++f) {
    std::map<int, Vec3> prev, next;
    for (const auto& p : frames[f - 1]) prev[p.id] = p.center;
    for (const auto& p : frames[f + 1]) next[p.id] = p.center;
    const Mat3 r = rotation_from_euler(egos[f].rho);
    const Mat3 rn = rotation_from_euler(egos[f + 1].rho);
    for (const auto& p : frames[f]) {
      const auto a = prev.find(p.id);
      const auto b = next.find(p.id);
      if (a == prev.end() || b == next.end()) continue;
      const Vec3 before = r * a->second + egos[f].gamma;
      const Vec3 after = rn.transpose() * (b->second - egos[f + 1].gamma);
      out[f][p.id] = 0.5 * (after - before).norm();
    }
  }
  return out;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::RangeError, "correlation inputs differ in length");
  if (a.size() < 2) throw Error(Errc::EmptyMatchSet, "correlation needs at least two pairs");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw Error(Errc::DegenerateVariance, "zero variance in correlation input");
  return sab / std::sqrt(saa * sbb);
}

enum class ScoreSelector { class_score, fused };

/// Pearson r between the selected score and the 3D IoU of each detection with
/// its best-overlapping ground truth (pairs with zero overlap are dropped).
inline double score_iou_correlation(std::span<const EvalDetection> dets, std::span<const EvalGroundTruth> gts,
                                    ScoreSelector which) {
  std::vector<double> scores, ious;
  for (const auto& d : dets) {
    double best = 0.0;
    for (const auto& g : gts)
      if (g.frame == d.frame) best = std::max(best, iou_3d(d.cuboid, g.cuboid));
    if (best <= 0.0) continue;
    scores.push_back(which == ScoreSelector::class_score ? d.class_score : d.fused);
    ious.push_back(best);
  }
  return pearson(scores, ious);
}

// ---------------------------------------------------------------------------
// Forecasting protocol
// ---------------------------------------------------------------------------

inline std::vector<EvalDetection> tracks_to_eval(std::span<const TrackState> tracks, int frame,
                                                 const std::optional<CalibProjection>& calib,
                                                 bool include_coasting = false) {
  std::vector<EvalDetection> out;
  for (const auto& t : tracks) {
    if (t.coasting && !include_coasting) continue;
    EvalDetection d;
    d.frame = frame;
    d.cuboid = t.cuboid();
    d.score = d.fused = t.mu;
    if (calib) {
      try {
        d.box2d = project_cuboid_to_box2d(d.cuboid, *calib);
      } catch (const Error&) {
        d.box2d = {0, 0, 0, 0};
      }
    } else {
      d.box2d = {0, 0, std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    }
    out.push_back(d);
  }
  return out;
}

struct SequenceFrame {
  std::vector<Measurement> measurements;
  EgoMotion ego;  // maps the previous frame into this one
  std::vector<EvalGroundTruth> gts;
};

using Sequence = std::vector<SequenceFrame>;

struct ForecastEvalOptions {
  int history = 4;  // frames tracked before forecasting
  IouKind kind = IouKind::three_d;
  std::vector<double> thresholds{0.7, 0.5, 0.3};
  Difficulty difficulty = Difficulty::all;
  int n_recall_points = 40;
  int end_offset = 0;  // evaluated frame counted back from the last frame
};

struct ForecastResult {
  int n_f = 0;
  std::vector<double> thresholds;
  std::vector<std::optional<double>> ap;
};

/// Tracks `history` frames ending n_f frames before the evaluated frame, then
/// forecasts n_f frames with the last ego-motion held fixed and scores the
/// forecast against the evaluated frame's ground truth.
inline ForecastResult forecast_eval(std::span<const Sequence> sequences, int n_f, const TrackerConfig& cfg,
                                    const std::optional<CalibProjection>& calib, const ForecastEvalOptions& opts = {}) {
  if (n_f < 0) throw Error(Errc::RangeError, "forecast horizon must be non-negative");
  if (opts.history < 1) throw Error(Errc::RangeError, "history must be at least one frame");
  std::vector<EvalDetection> dets;
  std::vector<EvalGroundTruth> gts;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    const Sequence& seq = sequences[s];
    const long long end = static_cast<long long>(seq.size()) - 1 - opts.end_offset;
    const long long first = end - n_f - opts.history + 1;
    if (first < 0 || end < 0) throw Error(Errc::InsufficientFrames, "sequence too short for the forecast window");
    Tracker tracker(cfg, calib);
    for (long long f = first; f <= end - n_f; ++f) {
      const EgoMotion ego = f == first ? EgoMotion::identity() : seq[f].ego;
      tracker.step(seq[f].measurements, ego);
    }
    const auto forecasted = tracker.forecast_n(n_f);
    for (auto d : tracks_to_eval(forecasted, static_cast<int>(s), calib)) dets.push_back(d);
    for (auto g : seq[end].gts) {
      g.frame = static_cast<int>(s);
      gts.push_back(g);
    }
  }
  ForecastResult r;
  r.n_f = n_f;
  r.thresholds = opts.thresholds;
  for (double t : opts.thresholds) r.ap.push_back(ap40(dets, gts, opts.kind, t, opts.difficulty, opts.n_recall_points));
  return r;
}

}  // namespace kin3d
