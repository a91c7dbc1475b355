// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "io_fuzz.hpp"
#include "kin3d/kin3d.hpp"
#include "oracles.hpp"

using namespace kin3d;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double circular_distance(double a, double b) { return std::abs(std::remainder(a - b, kTwoPi)); }

// 1 ---------------------------------------------------------------------------
Outcome orientation_round_trip() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-kPi, kPi), a0(-kPi, 0.0), a1(-kHalfPi, kHalfPi);
  std::vector<double> angles{-kPi, -3 * kPi / 4, -kPi / 4, kPi / 4, 3 * kPi / 4};
  for (int k = 0; k < 10000; ++k) angles.push_back(u(rng));
  double worst = 0.0;
  for (double t : angles) {
    const AxisAnchors anchors{a0(rng), a1(rng)};
    const auto d = decompose(t);
    worst = std::max(worst, circular_distance(recompose(d.theta_a, d.theta_h, encode_offset(d, anchors), anchors), t));
    for (int n : {2, 4, 10}) worst = std::max(worst, circular_distance(bin_recompose(bin_decompose(t, n), n), t));
    const auto m = measurement_theta_split(t);
    worst = std::max(worst, circular_distance(measurement_theta_merge(m.tau_theta, m.theta_h), t));
  }
  return {worst <= 1e-9, fmt("%zu angles, max error %.3g rad", angles.size(), worst)};
}

// 2 ---------------------------------------------------------------------------
Outcome anchor_round_trip() {
  const CalibProjection calib = kitti_like_calib();
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> x(-15, 15), y(0.5, 2.0), z(4, 70), s(0.4, 6), yaw(-kPi, kPi), px(0, 1242),
      sz(5, 300), a0(-kPi, 0), a1(-kHalfPi, kHalfPi);
  double worst = 0.0;
  for (int n = 0; n < 10000; ++n) {
    const Vec3 center(x(rng), y(rng), z(rng));
    const Projection p = project_center(center, calib);
    GroundTruthBox g;
    g.box2d = {px(rng), 0.3 * px(rng), sz(rng), sz(rng)};
    g.u = p.u;
    g.v = p.v;
    g.z = p.z;
    g.w3 = s(rng);
    g.h3 = s(rng);
    g.l3 = s(rng);
    g.theta = yaw(rng);
    Anchor a;
    a.w2 = sz(rng);
    a.h2 = sz(rng);
    a.z = z(rng);
    a.w3 = s(rng);
    a.h3 = s(rng);
    a.l3 = s(rng);
    a.theta0 = a0(rng);
    a.theta1 = a1(rng);
    const double i = px(rng), j = 0.3 * px(rng);
    const DecodedBox d = decode_targets(encode_targets(g, a, i, j), a, i, j, calib);
    for (double e : {d.box2d.x - g.box2d.x, d.box2d.y - g.box2d.y, d.box2d.w2 - g.box2d.w2, d.box2d.h2 - g.box2d.h2,
                     d.u - g.u, d.v - g.v, d.z - g.z, d.cuboid.w3 - g.w3, d.cuboid.h3 - g.h3, d.cuboid.l3 - g.l3,
                     (d.cuboid.center() - center).norm(), circular_distance(d.cuboid.theta, g.theta)})
      worst = std::max(worst, std::abs(e));
  }
  return {worst <= 1e-9, fmt("10000 boxes, max field error %.3g", worst)};
}

// 3 ---------------------------------------------------------------------------
Outcome kalman_limits() {
  TrackerConfig cfg;
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> u(-1, 1), yaw(-kPi, kPi), dim(1.0, 4.5), mu(0.01, 0.99);
  auto random_meas = [&](const Vec3& near, double m) {
    const Vec3 c = near + Vec3(2 * u(rng), 0.3 * u(rng), 2 * u(rng));
    return Measurement::from_cuboid({c.x(), c.y(), c.z(), dim(rng), dim(rng), dim(rng), yaw(rng)}, m);
  };

  double adopt = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    TrackState t = birth(random_meas({0, 1, 20}, 0.5), 0, cfg);
    for (int f = 0; f < 20; ++f) {
      t = forecast(t, {Vec3(0.1 * u(rng), 0, -0.5), Vec3(0, 0.02 * u(rng), 0)});
      const Measurement m = random_meas(t.center(), 1.0);
      t = update(t, m, cfg);
      adopt = std::max(adopt, (t.state.head<8>() - m.b).cwiseAbs().maxCoeff());
    }
  }

  TrackerConfig loose = cfg;
  loose.lambda_o = 1e6;
  double stay = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    TrackState t = birth(random_meas({0, 1, 20}, 0.6), 0, cfg);
    t.state[kVel] = u(rng);
    const TrackState f = forecast(t, EgoMotion::identity());
    const TrackState p = update(f, random_meas(f.center(), 0.01), loose);
    stay = std::max(stay, (p.state - f.state).cwiseAbs().maxCoeff());
  }

  double min_eig = 1e300, asym = 0.0;
  TrackState t = birth(random_meas({0, 1, 20}, 0.3), 0, cfg);
  for (int step = 0; step < 1000; ++step) {
    t = forecast(t, {Vec3(0.2 * u(rng), 0.05 * u(rng), 0.5 * u(rng)),
                     Vec3(0.01 * u(rng), 0.05 * u(rng), 0.01 * u(rng))});
    t = update(t, random_meas(t.center(), mu(rng)), cfg);
    asym = std::max(asym, (t.cov - t.cov.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Cov9>(t.cov).eigenvalues().minCoeff());
  }
  return {adopt <= 1e-9 && stay <= 1e-3 && min_eig >= -1e-9 && asym == 0.0,
          fmt("mu=1 max deviation %.3g; mu=0.01 max shift %.3g; min eigenvalue %.3g, asymmetry %.3g", adopt, stay,
              min_eig, asym)};
}

// 4 ---------------------------------------------------------------------------
Outcome scalar_oracle() {
  TrackerConfig cfg;
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> mu(0.05, 0.95), jitter(-0.2, 0.2), shift(-0.05, 0.05);
  const Vec3 base(1.0, 1.2, 15.0);
  const double mu0 = 0.4;
  Tracker tracker(cfg);
  tracker.step(std::vector<Measurement>{Measurement::from_cuboid({base.x(), base.y(), base.z(), 1.6, 1.5, 3.9, 0}, mu0)},
               EgoMotion::identity());
  oracle::ScalarKalman ref{base.y(), (1 - mu0) * cfg.lambda_o};
  double ref_mu = mu0, offset = 0.0, worst = 0.0;
  for (int f = 1; f <= 100; ++f) {
    const double g = shift(rng), m = mu(rng);
    offset += g;
    const Measurement meas =
        Measurement::from_cuboid({base.x(), base.y() + offset + jitter(rng), base.z(), 1.6, 1.5, 3.9, 0}, m);
    tracker.step(std::vector<Measurement>{meas}, {Vec3(0, g, 0), Vec3::Zero()});
    ref.predict(g, 1 - ref_mu);
    ref.correct(meas.b[kY], (1 - m) * cfg.lambda_o);
    ref_mu = 0.5 * (ref_mu + m);
    if (tracker.tracks().size() != 1) return {false, fmt("track lost at frame %d", f)};
    const TrackState& t = tracker.tracks()[0];
    worst = std::max({worst, std::abs(t.state[kY] - ref.x), std::abs(t.cov(kY, kY) - ref.p)});
  }
  return {worst <= 1e-12, fmt("100 frames, max deviation %.3g", worst)};
}

// 5 ---------------------------------------------------------------------------
Outcome fusion_benefit() {
  ScenarioSpec spec;
  spec.seed = 42;
  spec.n_objects = 20;
  spec.n_frames = 40;
  spec.noise.sigma_center = 0.5;
  const SimResult sim = simulate(spec);
  Tracker tracker({}, sim.calib);
  double se_track = 0, se_meas = 0, vel_abs = 0, vel_worst = 0;
  long n_track = 0, n_meas = 0, n_vel = 0, n_vel_ok = 0;
  for (const auto& f : sim.frames) {
    std::vector<Measurement> ms;
    for (const auto& d : f.detections) ms.push_back(to_measurement(d.det));
    tracker.step(ms, f.index == 0 ? EgoMotion::identity() : f.ego);
    if (f.index < 10) continue;
    for (const auto& d : f.detections) {
      se_meas += d.center_noise.squaredNorm();
      ++n_meas;
    }
    // one-to-one nearest-center matching of live tracks to truth, 2 m gate
    struct Pair {
      double d;
      std::size_t t, g;
    };
    std::vector<Pair> pairs;
    const auto& tracks = tracker.tracks();
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      if (tracks[t].coasting) continue;
      for (std::size_t g = 0; g < f.gts.size(); ++g) {
        const double d = (tracks[t].center() - f.gts[g].cuboid.center()).norm();
        if (d <= 2.0) pairs.push_back({d, t, g});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.d < b.d; });
    std::vector<bool> tu(tracks.size()), gu(f.gts.size());
    for (const auto& p : pairs) {
      if (tu[p.t] || gu[p.g]) continue;
      tu[p.t] = gu[p.g] = true;
      se_track += p.d * p.d;
      ++n_track;
      if (f.index >= 19) {
        const double e = std::abs(tracks[p.t].state[kVel] - f.gt_speeds[p.g]);
        vel_abs += e;
        vel_worst = std::max(vel_worst, e);
        n_vel_ok += e <= 0.2;
        ++n_vel;
      }
    }
  }
  const double ratio = std::sqrt(se_track / n_track) / std::sqrt(se_meas / n_meas);
  const double vel_mae = vel_abs / n_vel;
  return {ratio <= 0.6 && vel_mae <= 0.2,
          fmt("tracked/raw center RMSE %.3f (<= 0.60); speed MAE from frame 20 %.3f m/frame (<= 0.20), %.0f%% of "
              "estimates within 0.2, worst %.2f",
              ratio, vel_mae, 100.0 * n_vel_ok / n_vel, vel_worst)};
}

// 6 ---------------------------------------------------------------------------
Outcome ego_compensation() {
  ScenarioSpec spec;
  spec.n_frames = 30;
  spec.ego = {Vec3(0.05, 0.0, -0.6), Vec3(0.001, 0.015, -0.002)};
  for (int k = 0; k < 6; ++k) {
    ObjectInit o;
    o.center = Vec3(-6.0 + 2.5 * k, 1.0, 30.0 + 3.0 * k);
    o.yaw = -2.5 + 0.9 * k;
    spec.objects.push_back(o);
  }
  const SimResult sim = simulate(spec);
  TrackerConfig cfg;
  std::map<int, TrackState> states;
  double worst = 0.0;
  long checked = 0;
  for (const auto& f : sim.frames) {
    std::map<int, TrackState> next;
    for (const auto& d : f.detections) {
      const Measurement m = to_measurement(d.det);
      const auto it = states.find(d.gt_id);
      if (it == states.end()) {
        next.emplace(d.gt_id, birth(m, d.gt_id, cfg));
        continue;
      }
      const TrackState p = forecast(it->second, f.ego);
      worst = std::max({worst, (p.center() - d.det.cuboid.center()).norm(), circular_distance(p.yaw(), d.det.cuboid.theta)});
      ++checked;
      next.emplace(d.gt_id, update(p, m, cfg));
    }
    states = std::move(next);
  }

  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> u(-1, 1);
  double loop = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<EgoMotion> egos;
    for (int k = 0; k < 10; ++k) egos.push_back({Vec3(u(rng), 0.1 * u(rng), u(rng)), Vec3(0, 0.1 * u(rng), 0)});
    EgoMotion total = EgoMotion::identity();
    for (const auto& e : egos) total = compose(total, e);
    egos.push_back(inverse(total));
    TrackState t;
    t.state << 3 * u(rng), 1.0, 20 + 5 * u(rng), 1.6, 1.5, 3.9, 1.5 * u(rng), 0.0, 0.0;
    t.cov = Cov9::Identity() * 0.1;
    TrackState cur = t;
    for (const auto& e : egos) cur = forecast(cur, e);
    loop = std::max({loop, (cur.center() - t.center()).norm(), circular_distance(cur.yaw(), t.yaw())});
  }
  return {checked > 100 && worst <= 1e-6 && loop <= 1e-9,
          fmt("%ld predictions, max miss %.3g m; closed loop max drift %.3g", checked, worst, loop)};
}

// 7 ---------------------------------------------------------------------------
Outcome ap_correctness() {
  auto iou2d = [](const EvalDetection& d, const EvalGroundTruth& g) { return iou_2d(d.box2d, g.box2d); };
  long compared = 0, mismatched = 0;
  auto check = [&](const std::vector<EvalDetection>& dets, const std::vector<EvalGroundTruth>& gts) {
    for (double thr : {0.3, 0.5, 0.7}) {
      ++compared;
      if (ap40(dets, gts, iou2d, thr) != oracle::brute_force_ap(dets, gts, iou2d, thr)) ++mismatched;
    }
  };

  // exhaustive: up to 3 truths on 3 slots, up to 3 detections on 4 slots with 3 score levels
  const std::vector<Box2D> slots{{0, 0, 10, 10}, {5, 0, 10, 10}, {2, 0, 10, 10}, {100, 100, 10, 10}};
  const std::vector<double> levels{0.3, 0.6, 0.9};
  for (int mask = 0; mask < 8; ++mask) {
    std::vector<EvalGroundTruth> gts;
    for (int s = 0; s < 3; ++s)
      if (mask & (1 << s)) gts.push_back({0, {}, slots[s], 0, 0.0});
    for (int nd = 0; nd <= 3; ++nd) {
      int combos = 1;
      for (int k = 0; k < nd; ++k) combos *= 12;
      for (int c = 0; c < combos; ++c) {
        std::vector<EvalDetection> dets;
        int code = c;
        for (int k = 0; k < nd; ++k) {
          EvalDetection d;
          d.box2d = slots[code % 4];
          d.score = levels[(code / 4) % 3];
          code /= 12;
          dets.push_back(d);
        }
        check(dets, gts);
      }
    }
  }

  // random instances up to 20 boxes over 3 frames
  std::mt19937_64 rng(107);
  std::uniform_int_distribution<int> n(0, 10), frame(0, 2), pos(0, 6), size(2, 4), score(1, 6);
  bool monotone = true, stray_ok = true;
  for (int trial = 0; trial < 20000; ++trial) {
    std::vector<EvalDetection> dets;
    std::vector<EvalGroundTruth> gts;
    for (int k = n(rng); k > 0; --k)
      gts.push_back({frame(rng), {}, {double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))}, 0, 0.0});
    for (int k = n(rng); k > 0; --k) {
      EvalDetection d;
      d.frame = frame(rng);
      d.box2d = {double(pos(rng)), double(pos(rng)), double(size(rng)), double(size(rng))};
      d.score = score(rng) / 8.0;
      dets.push_back(d);
    }
    check(dets, gts);
    const auto base = ap40(dets, gts, iou2d, 0.5);
    auto warped = dets;
    for (auto& d : warped) d.score = std::exp(5 * d.score) - 0.5;
    monotone = monotone && ap40(warped, gts, iou2d, 0.5) == base;
    if (base) {
      auto more = dets;
      EvalDetection stray;
      stray.frame = 9;
      stray.box2d = {0, 0, 1, 1};
      stray.score = 0.0;
      more.push_back(stray);
      stray_ok = stray_ok && *ap40(more, gts, iou2d, 0.5) <= *base;
    }
  }

  const CalibProjection calib = kitti_like_calib();
  const Cuboid3D truth{0, 1, 20, 1.6, 1.5, 3.9, 0}, far{8, 1, 40, 1.6, 1.5, 3.9, 0};
  const std::vector<EvalGroundTruth> one{{0, truth, project_cuboid_to_box2d(truth, calib), 0, 0.0}};
  const std::vector<EvalDetection> fp_tp{{0, far, project_cuboid_to_box2d(far, calib), 0.9, 0.9, 0.9},
                                         {0, truth, project_cuboid_to_box2d(truth, calib), 0.8, 0.8, 0.8}};
  const auto hand = ap40(fp_tp, one, IouKind::three_d, 0.7);
  return {mismatched == 0 && hand == 0.5 && monotone && stray_ok,
          fmt("%ld comparisons, %ld mismatches; FP/TP example AP %.3f; monotone invariance %s; stray detection %s",
              compared, mismatched, hand.value_or(-1.0), monotone ? "holds" : "violated",
              stray_ok ? "never helps" : "helped")};
}

// 8 ---------------------------------------------------------------------------
Outcome self_balancing() {
  double worst_flip = 0.0, worst_grad = 0.0;
  for (double lambda : {0.2, 0.5, 0.8, 1.3, 2.0}) {
    // l3d on a 1e-3 grid around lambda; argmin over omega on a 1e-3 grid
    double flip = -1.0;
    bool prev_one = true;
    for (int k = -200; k <= 200; ++k) {
      const double l3d = lambda + k * 1e-3 + 5e-4;
      double best = 1e300, arg = -1.0;
      for (int w = 0; w <= 1000; ++w) {
        const double v = self_balancing_loss(0.4, l3d, w / 1000.0, lambda);
        if (v < best) {
          best = v;
          arg = w / 1000.0;
        }
      }
      const bool one = arg == 1.0;
      if (k == -200 && !one) return {false, fmt("argmin below lambda=%.2f is %.3f", lambda, arg)};
      if (prev_one && !one && flip < 0) flip = l3d;
      if (!prev_one && one) return {false, fmt("argmin returned to 1 above lambda=%.2f", lambda)};
      prev_one = one;
    }
    worst_flip = std::max(worst_flip, std::abs(flip - lambda));
    std::mt19937_64 rng(108);
    std::uniform_real_distribution<double> l(0, 5), w(0.01, 0.99);
    for (int k = 0; k < 200; ++k) {
      const double l3d = l(rng), omega = w(rng), h = 1e-6;
      const double fd =
          (self_balancing_loss(0.4, l3d, omega + h, lambda) - self_balancing_loss(0.4, l3d, omega - h, lambda)) / (2 * h);
      worst_grad = std::max(worst_grad, std::abs(fd - (l3d - lambda)));
    }
  }
  return {worst_flip <= 1e-3 && worst_grad <= 1e-8,
          fmt("flip within %.2g of lambda; max gradient error %.3g", worst_flip, worst_grad)};
}

// 9 ---------------------------------------------------------------------------
Outcome correlation() {
  std::string values;
  bool all = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.noise = {0.5, 0.05, 0.05, 0.5, 1.0};
    std::vector<EvalDetection> dets;
    std::vector<EvalGroundTruth> gts;
    fixture::flatten(simulate(spec), dets, gts);
    const double rm = score_iou_correlation(dets, gts, ScoreSelector::fused);
    const double rc = score_iou_correlation(dets, gts, ScoreSelector::class_score);
    all = all && rm > rc;
    values += fmt("%s%.2f/%.2f", seed ? " " : "", rm, rc);
  }
  return {all, "r(mu)/r(c) per seed: " + values};
}

// 10 --------------------------------------------------------------------------
Outcome forecast_degradation() {
  ForecastEvalOptions opts;
  opts.history = fixture::kForecastHistory;
  const CalibProjection calib = kitti_like_calib();
  std::string noisy_txt, clean_txt;
  bool monotone = true, constant = true;
  for (double sigma : {0.0, 0.2}) {
    const auto seqs = fixture::forecast_sequences(sigma);
    std::vector<ForecastResult> rs;
    for (int nf = 0; nf <= 4; ++nf) rs.push_back(forecast_eval(seqs, nf, {}, calib, opts));
    std::string& txt = sigma == 0.0 ? clean_txt : noisy_txt;
    for (std::size_t k = 0; k < opts.thresholds.size(); ++k) {
      txt += fmt(" @%.1f:", opts.thresholds[k]);
      for (int nf = 0; nf <= 4; ++nf) {
        const double ap = rs[nf].ap[k].value_or(-1.0);
        txt += fmt("%s%.3f", nf ? "," : "", ap);
        if (nf == 0) continue;
        const double prev = rs[nf - 1].ap[k].value_or(-1.0);
        if (sigma == 0.0) constant = constant && ap == rs[0].ap[k].value_or(-2.0);
        else monotone = monotone && ap <= prev;
      }
    }
  }
  return {monotone && constant, "AP3D n_f=0..4, sigma 0.2" + noisy_txt + "; sigma 0" + clean_txt};
}

// 11 --------------------------------------------------------------------------
Outcome iou_oracle() {
  std::mt19937_64 rng(111);
  double worst_bev = 0.0, worst_3d = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto [a, b] = oracle::random_pair(rng);
    worst_bev = std::max(worst_bev, std::abs(iou_bev(a, b) - oracle::mc_iou_bev(a, b, 1000000, rng)));
    worst_3d = std::max(worst_3d, std::abs(iou_3d(a, b) - oracle::mc_iou_3d(a, b, 1000000, rng)));
  }
  return {worst_bev <= 0.01 && worst_3d <= 0.01,
          fmt("200 pairs x 1e6 samples, max |error| BEV %.4f, 3D %.4f", worst_bev, worst_3d)};
}

// 12 --------------------------------------------------------------------------
Outcome io_robustness() {
  const std::string dir = KIN3D_TEST_DATA;
  std::vector<std::string> wrong;
  auto expect = [&](bool ok, const char* what) {
    if (!ok) wrong.push_back(what);
  };
  try {
    const auto labels = io::read_kitti_labels(dir + "/label_000000.txt");
    expect(labels.size() == 4, "label count");
    expect(labels[0].cuboid.center() == Vec3(0, 1, 10), "label center");
    expect(labels[0].cuboid.w3 == 1.6 && labels[0].cuboid.h3 == 1.5 && labels[0].cuboid.l3 == 3.9, "label dims");
    expect(labels[0].cuboid.theta == -1.57, "label yaw");
    expect(labels[3].dont_care(), "DontCare");
    const auto p2 = io::read_kitti_calib(dir + "/calib_000000.txt").projection();
    expect(p2.upsilon(0, 0) == 721.5377 && p2.upsilon(0, 3) == 44.85728 && p2.upsilon(2, 3) == 2.745884e-03, "P2");
    const auto o0 = io::read_kitti_oxts(dir + "/oxts/0000000000.txt");
    const auto o1 = io::read_kitti_oxts(dir + "/oxts/0000000001.txt");
    const auto o2 = io::read_kitti_oxts(dir + "/oxts/0000000002.txt");
    const EgoMotion still = io::ego_from_oxts(o0[0], o1[0]);
    expect(still.gamma.norm() < 1e-12 && still.rho.norm() < 1e-12, "identical oxts -> identity");
    expect((io::ego_from_oxts(o1[0], o2[0]).gamma - Vec3(0, 0, -1)).norm() < 1e-6, "1 m forward");
    const auto dets = io::read_detections(dir + "/detections.txt");
    expect(dets.size() == 2 && std::abs(dets[1].detections[0].mu - 0.4) < 1e-15, "fused score 0.4");
    expect(dets[0].detections[0].omega == 1.0, "omega default");
  } catch (const std::exception& e) {
    wrong.push_back(e.what());
  }
  const fuzz::Stats st = fuzz::run(100000, 112);
  std::string bad;
  for (const auto& w : wrong) bad += " " + w + ";";
  return {wrong.empty() && st.untyped_errors == 0,
          fmt("fixtures %s; fuzz %ld lines: %ld parsed, %ld typed errors, %ld untyped", wrong.empty() ? "ok" : "WRONG",
              st.inputs, st.parsed, st.typed_errors, st.untyped_errors) +
              bad + (st.first_untyped.empty() ? "" : " first untyped: " + st.first_untyped)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "orientation round-trip", 1.0, orientation_round_trip},
      {2, "anchor codec round-trip", 1.0, anchor_round_trip},
      {3, "Kalman limits and PSD covariance", 0.0, kalman_limits},
      {4, "scalar Kalman oracle", 0.0, scalar_oracle},
      {5, "fusion benefit", 5.0, fusion_benefit},
      {6, "ego compensation", 0.0, ego_compensation},
      {7, "AP40 correctness", 0.0, ap_correctness},
      {8, "self-balancing loss", 0.0, self_balancing},
      {9, "score/IoU correlation", 0.0, correlation},
      {10, "forecast degradation", 10.0, forecast_degradation},
      {11, "IoU Monte-Carlo oracle", 30.0, iou_oracle},
      {12, "I/O robustness", 0.0, io_robustness},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s == 0.0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::string budget = c.budget_s > 0 ? fmt(" / %.0f s", c.budget_s) : "";
    std::printf("%s %2d %s: %s (%.2f s%s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                budget.c_str(), in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
