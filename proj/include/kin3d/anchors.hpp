#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"
#include "kin3d/orientation.hpp"

namespace kin3d {

/// Joint 2D-3D box template.
struct Anchor {
  double w2 = 1, h2 = 1;  // pixels
  double z = 1;           // projected depth buffer, meters
  double w3 = 1, h3 = 1, l3 = 1;
  double theta0 = -kHalfPi;  // orientation for axis 0, in [-pi, 0)
  double theta1 = 0.0;       // orientation for axis 1, in [-pi/2, pi/2)

  AxisAnchors thetas() const { return {theta0, theta1}; }
};

struct RegressionTargets {
  std::array<double, 4> t2d{};  // tx, ty, tw, th
  std::array<double, 7> t3d{};  // tu, tv, tz, tw3, th3, tl3, t_theta_r
  double theta_a = 1.0;         // binary for ground truth, probability for predictions
  double theta_h = 0.0;
};

struct GroundTruthBox {
  Box2D box2d;
  double u = 0, v = 0, z = 1;  // projected 3D center
  double w3 = 1, h3 = 1, l3 = 1;
  double theta = 0;
  int label = 1;  // 0 is background
  int occlusion = 0;
  double truncation = 0;
};

struct DecodedBox {
  Box2D box2d;
  double u, v, z;
  Cuboid3D cuboid;
};

/// Regression targets of a ground truth relative to an anchor placed at pixel (i, j).
inline RegressionTargets encode_targets(const GroundTruthBox& gt, const Anchor& a, double i, double j) {
  const OrientationDecomp d = decompose(gt.theta);
  RegressionTargets t;
  t.t2d = {(gt.box2d.cx() - i) / a.w2, (gt.box2d.cy() - j) / a.h2, std::log(gt.box2d.w2 / a.w2),
           std::log(gt.box2d.h2 / a.h2)};
  t.t3d = {(gt.u - i) / a.w2,       (gt.v - j) / a.h2,        gt.z - a.z, std::log(gt.w3 / a.w3),
           std::log(gt.h3 / a.h3), std::log(gt.l3 / a.l3), encode_offset(d, a.thetas())};
  t.theta_a = d.theta_a;
  t.theta_h = d.theta_h;
  return t;
}

/// Applies regression targets to an anchor at (i, j) and back-projects the 3D center.
inline DecodedBox decode_targets(const RegressionTargets& t, const Anchor& a, double i, double j,
                                 const CalibProjection& calib) {
  DecodedBox out;
  const double cx = i + t.t2d[0] * a.w2;
  const double cy = j + t.t2d[1] * a.h2;
  const double w2 = a.w2 * std::exp(t.t2d[2]);
  const double h2 = a.h2 * std::exp(t.t2d[3]);
  out.box2d = {cx - 0.5 * w2, cy - 0.5 * h2, w2, h2};
  out.u = i + t.t3d[0] * a.w2;
  out.v = j + t.t3d[1] * a.h2;
  out.z = t.t3d[2] + a.z;
  if (!(out.z > 0.0)) throw Error(Errc::NonPositiveDepth, "decoded depth is not positive");
  const Vec3 c = backproject(out.u, out.v, out.z, calib);
  out.cuboid = {c.x(),
                c.y(),
                c.z(),
                a.w3 * std::exp(t.t3d[3]),
                a.h3 * std::exp(t.t3d[4]),
                a.l3 * std::exp(t.t3d[5]),
                recompose(t.theta_a, t.theta_h, t.t3d[6], a.thetas())};
  return out;
}

namespace detail {

/// 2D IoU of two sizes sharing a center.
inline double centered_iou(double wa, double ha, double wb, double hb) {
  const double inter = std::min(wa, wb) * std::min(ha, hb);
  return inter / (wa * ha + wb * hb - inter);
}

}  // namespace detail

struct ClusterOptions {
  int max_iterations = 20;
};

/// k-template clustering of ground truths by 2D size.
///
/// Templates start at 2D-scale quantiles; each pass assigns every box to the
/// template with the highest centered 2D IoU (ties to the lower index) and
/// moves templates to their member means. Final anchors hold the member means
/// of every parameter; empty clusters keep their 2D template and take the
/// global 3D means.
inline std::vector<Anchor> cluster_anchors(std::span<const GroundTruthBox> gts, int n_a,
                                           ClusterOptions opts = {}) {
  if (n_a < 1) throw Error(Errc::RangeError, "anchor count must be positive");
  if (gts.size() < static_cast<std::size_t>(n_a))
    throw Error(Errc::InsufficientData, "fewer ground truths than anchors");

  const std::size_t n = gts.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return gts[a].box2d.area() < gts[b].box2d.area();
  });

  std::vector<std::array<double, 2>> tmpl(n_a);
  for (int k = 0; k < n_a; ++k) {
    const auto idx = order[static_cast<std::size_t>((k + 0.5) * static_cast<double>(n) / n_a)];
    tmpl[k] = {gts[idx].box2d.w2, gts[idx].box2d.h2};
  }

  std::vector<int> assign(n, -1);
  for (int it = 0; it < opts.max_iterations; ++it) {
    bool changed = false;
    for (std::size_t g = 0; g < n; ++g) {
      int best = 0;
      double best_iou = -1.0;
      for (int k = 0; k < n_a; ++k) {
        const double iou = detail::centered_iou(gts[g].box2d.w2, gts[g].box2d.h2, tmpl[k][0], tmpl[k][1]);
        if (iou > best_iou) {
          best_iou = iou;
          best = k;
        }
      }
      if (assign[g] != best) {
        assign[g] = best;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::array<double, 3>> acc(n_a, {0.0, 0.0, 0.0});
    for (std::size_t g = 0; g < n; ++g) {
      acc[assign[g]][0] += gts[g].box2d.w2;
      acc[assign[g]][1] += gts[g].box2d.h2;
      acc[assign[g]][2] += 1.0;
    }
    for (int k = 0; k < n_a; ++k)
      if (acc[k][2] > 0) tmpl[k] = {acc[k][0] / acc[k][2], acc[k][1] / acc[k][2]};
  }

  struct Sums {
    double w2 = 0, h2 = 0, z = 0, w3 = 0, h3 = 0, l3 = 0, count = 0;
    double r0 = 0, n0 = 0, r1 = 0, n1 = 0;
    void add(const GroundTruthBox& g) {
      w2 += g.box2d.w2;
      h2 += g.box2d.h2;
      z += g.z;
      w3 += g.w3;
      h3 += g.h3;
      l3 += g.l3;
      count += 1;
      const OrientationDecomp d = decompose(g.theta);
      if (d.theta_a == 0) {
        r0 += d.theta_r;
        n0 += 1;
      } else {
        r1 += d.theta_r;
        n1 += 1;
      }
    }
  };
  Sums global;
  std::vector<Sums> per(n_a);
  for (std::size_t g = 0; g < n; ++g) {
    global.add(gts[g]);
    per[assign[g]].add(gts[g]);
  }

  std::vector<Anchor> anchors(n_a);
  for (int k = 0; k < n_a; ++k) {
    const Sums& s = per[k].count > 0 ? per[k] : global;
    Anchor& a = anchors[k];
    if (per[k].count > 0) {
      a.w2 = s.w2 / s.count;
      a.h2 = s.h2 / s.count;
    } else {
      a.w2 = tmpl[k][0];
      a.h2 = tmpl[k][1];
    }
    a.z = s.z / s.count;
    a.w3 = s.w3 / s.count;
    a.h3 = s.h3 / s.count;
    a.l3 = s.l3 / s.count;
    a.theta0 = s.n0 > 0 ? s.r0 / s.n0 : -kHalfPi;
    a.theta1 = s.n1 > 0 ? s.r1 / s.n1 : 0.0;
  }
  return anchors;
}

/// Index of the best-IoU ground truth when that IoU reaches k, otherwise background.
inline std::optional<std::size_t> match_foreground(const Box2D& pred, std::span<const Box2D> gts,
                                                   double k = 0.5) {
  std::optional<std::size_t> best;
  double best_iou = -1.0;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const double iou = iou_2d(pred, gts[g]);
    if (iou > best_iou) {
      best_iou = iou;
      best = g;
    }
  }
  if (best && best_iou >= k) return best;
  return std::nullopt;
}

}  // namespace kin3d
