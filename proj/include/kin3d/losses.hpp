#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <span>

#include "kin3d/anchors.hpp"
#include "kin3d/error.hpp"
#include "kin3d/geometry.hpp"

namespace kin3d {

inline constexpr double kLogFloor = 1e-12;

inline double safe_neg_log(double p) { return -std::log(std::max(p, kLogFloor)); }

inline void require_unit(double x, const char* name) {
  if (!(x >= 0.0 && x <= 1.0)) throw Error(Errc::RangeError, std::string(name) + " must lie in [0, 1]");
}

struct Loss2D {
  double value = 0.0;
  bool zero_iou = false;  // foreground box with no overlap; the log term was clamped
};

/// -log(IoU)·[gt_class != 0] + CE, with class_probs already softmax-normalised.
inline Loss2D loss_2d(const Box2D& pred, const Box2D& gt, std::span<const double> class_probs, int gt_class) {
  if (gt_class < 0 || static_cast<std::size_t>(gt_class) >= class_probs.size())
    throw Error(Errc::RangeError, "ground-truth class outside the probability vector");
  Loss2D out;
  out.value = safe_neg_log(class_probs[gt_class]);
  if (gt_class != 0) {
    const double iou = iou_2d(pred, gt);
    out.zero_iou = iou <= 0.0;
    out.value += safe_neg_log(iou);
  }
  return out;
}

inline double binary_cross_entropy(double p, double y) {
  return y * safe_neg_log(p) + (1.0 - y) * safe_neg_log(1.0 - p);
}

/// L1 over the seven 3D targets plus lambda_a · BCE over (theta_a, theta_h).
/// Predicted theta_a / theta_h are post-sigmoid probabilities.
inline double loss_3d(const RegressionTargets& pred, const RegressionTargets& gt, double lambda_a = 0.35) {
  double l1 = 0.0;
  for (std::size_t k = 0; k < pred.t3d.size(); ++k) l1 += std::abs(pred.t3d[k] - gt.t3d[k]);
  const double bce = binary_cross_entropy(pred.theta_a, gt.theta_a) + binary_cross_entropy(pred.theta_h, gt.theta_h);
  return l1 + lambda_a * bce;
}

inline double self_balancing_loss(double l2d, double l3d, double omega, double lambda_L) {
  require_unit(omega, "omega");
  return l2d + omega * l3d + lambda_L * (1.0 - omega);
}

/// Closed-form derivative of self_balancing_loss with respect to omega.
inline double self_balancing_grad_omega(double l3d, double lambda_L) { return l3d - lambda_L; }

struct LossBreakdown {
  double l2d = 0, l3d = 0, total = 0;
  double omega = 1;
  double lambda_L = 0;
};

/// Background boxes carry the 2D term only.
inline LossBreakdown compose_loss(double l2d, double l3d, double omega, double lambda_L, bool foreground) {
  LossBreakdown b{l2d, foreground ? l3d : 0.0, l2d, omega, lambda_L};
  if (foreground) b.total = self_balancing_loss(l2d, l3d, omega, lambda_L);
  return b;
}

inline double fuse_score(double c, double omega) {
  require_unit(c, "class score");
  require_unit(omega, "3D confidence");
  return c * omega;
}

/// L1 translation error plus lambda_r times the angle-wrapped L1 rotation error.
inline double ego_loss(const Vec3& gamma, const Vec3& rho, const Vec3& gamma_gt, const Vec3& rho_gt,
                       double lambda_r = 40.0) {
  double rot = 0.0;
  for (int k = 0; k < 3; ++k) rot += std::abs(wrap_angle(rho[k] - rho_gt[k]));
  return (gamma - gamma_gt).cwiseAbs().sum() + lambda_r * rot;
}

/// Mean of the most recent `window` values; supplies lambda_L.
class RollingMean {
 public:
  explicit RollingMean(std::size_t window = 100) : window_(window) {
    if (window_ == 0) throw Error(Errc::RangeError, "rolling window must be positive");
  }

  void push(double value) {
    values_.push_back(value);
    if (values_.size() > window_) values_.pop_front();
  }

  double mean() const {
    if (values_.empty()) return 0.0;
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
  }

  std::size_t size() const { return values_.size(); }
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
  std::deque<double> values_;
};

}  // namespace kin3d
