#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kin3d/kin3d.hpp"

namespace fs = std::filesystem;
using namespace kin3d;
using json = nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options shared by every subcommand that tracks or evaluates.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_path, "flat key=value configuration file");
    for (const auto& key : io::config_keys()) app.add_option("--" + key, overrides[key], "overrides config key " + key);
  }

  std::pair<TrackerConfig, EvalConfig> resolve() const {
    TrackerConfig tc;
    EvalConfig ec;
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = io::read_config(config_path);
    for (const auto& [k, v] : overrides)
      if (!v.empty()) kv[k] = v;
    try {
      io::apply_config(kv, tc, ec);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return {tc, ec};
  }
};

std::string json_number(double v) { return io::format_double(v); }

void emit_json(std::ostream* out, const json& j) {
  if (out) *out << j.dump() << '\n';
}

std::optional<CalibProjection> load_calib(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return io::read_kitti_calib(path).projection("P2");
}

std::vector<EvalGroundTruth> load_gt(const std::string& path, const std::string& cls) {
  std::vector<EvalGroundTruth> out;
  for (const auto& l : io::read_kitti_tracking_labels(path))
    if (l.type == cls) out.push_back(io::to_eval(l));
  return out;
}

/// Frame -> measurements and ego for the contiguous frame range covered by either file.
struct TrackInput {
  int first = 0, last = -1;
  std::map<int, std::vector<Measurement>> meas;
  std::map<int, EgoMotion> ego;
};

TrackInput load_track_input(const std::string& det_path, const std::string& ego_path, const std::string& cls) {
  TrackInput in;
  std::set<int> frames;
  for (const auto& f : io::read_detections(det_path)) {
    frames.insert(f.frame);
    auto& ms = in.meas[f.frame];
    for (const auto& d : f.detections)
      if (d.label == cls) ms.push_back(to_measurement(d));
  }
  if (!ego_path.empty()) {
    in.ego = io::read_ego(ego_path);
    for (const auto& [f, e] : in.ego) frames.insert(f);
  }
  if (!frames.empty()) {
    in.first = *frames.begin();
    in.last = *frames.rbegin();
  }
  return in;
}

Sequence load_sequence(const fs::path& dir, const std::string& cls) {
  const TrackInput in = load_track_input((dir / "detections.txt").string(), (dir / "ego.txt").string(), cls);
  const auto gts = load_gt((dir / "gt.txt").string(), cls);
  int last = in.last;
  for (const auto& g : gts) {
    if (g.frame < 0) throw Error(Errc::RangeError, "negative frame index in " + (dir / "gt.txt").string());
    last = std::max(last, g.frame);
  }
  Sequence seq(static_cast<std::size_t>(std::max(last + 1, 0)));
  for (const auto& [f, ms] : in.meas) seq[f].measurements = ms;
  for (const auto& [f, e] : in.ego)
    if (f < static_cast<int>(seq.size())) seq[f].ego = e;
  for (const auto& g : gts) seq[g.frame].gts.push_back(g);
  return seq;
}

// --------------------------------------------------------------------------

struct TrackCmd {
  std::string detections, ego, calib, output, cls = "Car";
  ConfigFlags cfg;

  int run() const {
    const auto [tc, ec] = cfg.resolve();
    const auto cal = load_calib(calib);
    const TrackInput in = load_track_input(detections, ego, cls);
    std::ofstream file;
    if (!output.empty()) file = io::open_output(output);
    std::ostream& out = output.empty() ? std::cout : file;

    Tracker tracker(tc, cal);
    for (int f = in.first; f <= in.last; ++f) {
      const auto mi = in.meas.find(f);
      const std::vector<Measurement> none;
      const auto& ms = mi == in.meas.end() ? none : mi->second;
      const auto ei = in.ego.find(f);
      const EgoMotion e = (f == in.first || ei == in.ego.end()) ? EgoMotion::identity() : ei->second;
      for (const auto& t : tracker.step(ms, e)) io::write_track_record(out, io::to_record(t, f, tc.frame_rate));
    }
    return 0;
  }
};

struct EvaluateCmd {
  std::string detections, tracks, gt, calib, json_path, cls = "Car", score = "fused";
  bool include_coasting = false;
  ConfigFlags cfg;

  int run() const {
    if (gt.empty()) throw UsageError("--gt is required");
    if (detections.empty() == tracks.empty()) throw UsageError("give exactly one of --detections or --tracks");
    if (score != "fused" && score != "class") throw UsageError("--score must be 'fused' or 'class'");
    const auto [tc, ec] = cfg.resolve();
    const auto cal = load_calib(calib);
    const auto gts = load_gt(gt, cls);

    std::vector<EvalDetection> dets;
    if (!detections.empty()) {
      for (const auto& f : io::read_detections(detections))
        for (const auto& d : f.detections) {
          if (d.label != cls) continue;
          dets.push_back({f.frame, d.cuboid, d.box2d, score == "fused" ? d.mu : d.score, d.score, d.mu});
        }
    } else {
      for (const auto& r : io::read_tracks(tracks)) {
        if (r.coasting && !include_coasting) continue;
        EvalDetection d;
        d.frame = r.frame;
        d.cuboid = r.cuboid();
        d.score = d.class_score = d.fused = r.mu;
        d.box2d = {0, 0, 0, 0};
        if (cal) {
          try {
            d.box2d = project_cuboid_to_box2d(d.cuboid, *cal);
          } catch (const Error&) {
          }
        }
        dets.push_back(d);
      }
    }

    std::ofstream jfile;
    if (!json_path.empty()) jfile = io::open_output(json_path);
    std::ostream* jout = json_path.empty() ? nullptr : &jfile;

    std::vector<IouKind> kinds{IouKind::bev, IouKind::three_d};
    if (!detections.empty() || cal) kinds.insert(kinds.begin(), IouKind::two_d);

    std::cout << "metric,iou,threshold,difficulty,max_depth,value\n";
    auto row = [&](const std::string& metric, const std::string& kind, double thr, const std::string& diff,
                   double depth, std::optional<double> v) {
      std::cout << metric << ',' << kind << ',' << json_number(thr) << ',' << diff << ','
                << (std::isinf(depth) ? "inf" : json_number(depth)) << ',' << (v ? json_number(*v) : "nan") << '\n';
      json j{{"metric", metric}, {"iou", kind}, {"threshold", thr}, {"difficulty", diff}};
      j["max_depth"] = std::isinf(depth) ? json("inf") : json(depth);
      j["value"] = v ? json(*v) : json(nullptr);
      emit_json(jout, j);
    };
    for (IouKind k : kinds)
      for (double t : ec.iou_thresholds)
        for (Difficulty d : ec.difficulties)
          row("ap" + std::to_string(ec.n_recall_points), to_string(k), t, to_string(d),
              std::numeric_limits<double>::infinity(), ap40(dets, gts, k, t, d, ec.n_recall_points));
    for (double t : ec.iou_thresholds) {
      const auto by_depth = ap_by_depth(dets, gts, IouKind::three_d, t, ec.depth_bins, Difficulty::all,
                                        ec.n_recall_points);
      for (std::size_t b = 0; b < by_depth.size(); ++b)
        row("ap" + std::to_string(ec.n_recall_points), "3d", t, "all", ec.depth_bins[b], by_depth[b]);
    }

    auto scalar = [&](const std::string& name, std::optional<double> v) {
      std::cout << name << ",,,,," << (v ? json_number(*v) : "nan") << '\n';
      emit_json(jout, json{{"metric", name}, {"value", v ? json(*v) : json(nullptr)}});
    };
    auto guarded = [](auto&& fn) -> std::optional<double> {
      try {
        return fn();
      } catch (const Error&) {
        return std::nullopt;
      }
    };
    scalar("mean_angle_error_deg", guarded([&] { return mean_angle_error(dets, gts); }));
    if (!detections.empty()) {
      scalar("corr_fused_iou3d", guarded([&] { return score_iou_correlation(dets, gts, ScoreSelector::fused); }));
      scalar("corr_class_iou3d", guarded([&] { return score_iou_correlation(dets, gts, ScoreSelector::class_score); }));
    }
    return 0;
  }
};

struct SimulateCmd {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int objects = 20, frames = 40;
  double sigma_center = 0.5, sigma_dims = 0.0, sigma_yaw = 0.0;
  double score_min = 0.5, score_max = 1.0, speed_max = 1.5;
  std::vector<double> ego_translation{0, 0, 0}, ego_rotation{0, 0, 0};

  int run() const {
    ScenarioSpec spec;
    spec.seed = seed;
    spec.n_objects = objects;
    spec.n_frames = frames;
    spec.noise = {sigma_center, sigma_dims, sigma_yaw, score_min, score_max};
    spec.speed_max = speed_max;
    spec.ego.gamma = Vec3(ego_translation[0], ego_translation[1], ego_translation[2]);
    spec.ego.rho = Vec3(ego_rotation[0], ego_rotation[1], ego_rotation[2]);
    SimResult sim;
    try {
      sim = simulate(spec);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(Errc::IoError, "cannot create '" + out_dir + "'");
    const fs::path dir(out_dir);

    std::vector<FrameRecord> dets;
    std::map<int, EgoMotion> egos;
    std::vector<io::KittiLabel> labels;
    for (const auto& f : sim.frames) {
      FrameRecord r;
      r.frame = f.index;
      for (const auto& d : f.detections) r.detections.push_back(d.det);
      if (!r.detections.empty()) dets.push_back(std::move(r));
      egos[f.index] = f.index == 0 ? EgoMotion::identity() : f.ego;
      for (const auto& g : f.gts) {
        io::KittiLabel l;
        l.frame = f.index;
        l.track_id = g.track_id;
        l.type = g.label;
        l.occluded = g.occlusion;
        l.truncated = g.truncation;
        l.alpha = wrap_angle(g.cuboid.theta - std::atan2(g.cuboid.x, g.cuboid.z));
        l.box2d = g.box2d;
        l.cuboid = g.cuboid;
        labels.push_back(l);
      }
    }
    auto det_out = io::open_output((dir / "detections.txt").string());
    io::write_detections(det_out, dets);
    auto ego_out = io::open_output((dir / "ego.txt").string());
    io::write_ego(ego_out, egos);
    auto gt_out = io::open_output((dir / "gt.txt").string());
    io::write_kitti_tracking_labels(gt_out, labels);
    auto calib_out = io::open_output((dir / "calib.txt").string());
    io::write_kitti_calib(calib_out, sim.calib);
    for (auto* s : {&det_out, &ego_out, &gt_out, &calib_out})
      if (!s->flush()) throw Error(Errc::IoError, "write failed in '" + out_dir + "'");
    return 0;
  }
};

struct ForecastCmd {
  std::vector<std::string> dirs;
  int max_nf = 4, history = 4, frame_offset = 0;
  std::string iou = "3d", difficulty = "all", json_path, cls = "Car";
  ConfigFlags cfg;

  int run() const {
    const auto [tc, ec] = cfg.resolve();
    if (max_nf < 0) throw UsageError("--max-nf must be non-negative");
    if (history < 1) throw UsageError("--history must be positive");
    if (frame_offset < 0) throw UsageError("--frame-offset must be non-negative");
    ForecastEvalOptions opts;
    opts.history = history;
    opts.end_offset = frame_offset;
    opts.thresholds = ec.iou_thresholds;
    opts.n_recall_points = ec.n_recall_points;
    if (iou == "2d") opts.kind = IouKind::two_d;
    else if (iou == "bev") opts.kind = IouKind::bev;
    else if (iou == "3d") opts.kind = IouKind::three_d;
    else throw UsageError("--iou must be 2d, bev or 3d");
    try {
      opts.difficulty = io::detail::parse_difficulty(difficulty);
    } catch (const Error& e) {
      throw UsageError(std::string("--difficulty: ") + e.what());
    }

    std::vector<Sequence> seqs;
    std::optional<CalibProjection> cal;
    for (const auto& d : dirs) {
      seqs.push_back(load_sequence(d, cls));
      const auto c = load_calib((fs::path(d) / "calib.txt").string());
      if (!cal) cal = c;
    }

    std::ofstream jfile;
    if (!json_path.empty()) jfile = io::open_output(json_path);
    std::ostream* jout = json_path.empty() ? nullptr : &jfile;
    std::cout << "n_f,iou,threshold,ap\n";
    for (int nf = 0; nf <= max_nf; ++nf) {
      ForecastResult r;
      try {
        r = forecast_eval(seqs, nf, tc, cal, opts);
      } catch (const Error& e) {
        if (e.code() == Errc::InsufficientFrames) throw UsageError(e.what());
        throw;
      }
      for (std::size_t k = 0; k < r.thresholds.size(); ++k) {
        std::cout << nf << ',' << iou << ',' << json_number(r.thresholds[k]) << ','
                  << (r.ap[k] ? json_number(*r.ap[k]) : "nan") << '\n';
        emit_json(jout, json{{"metric", "forecast_ap"},
                             {"n_f", nf},
                             {"iou", iou},
                             {"threshold", r.thresholds[k]},
                             {"value", r.ap[k] ? json(*r.ap[k]) : json(nullptr)}});
      }
    }
    return 0;
  }
};

struct AnchorsCmd {
  std::string gt, calib, output, cls = "Car";
  int count = 36, iterations = 20;

  int run() const {
    if (calib.empty()) throw UsageError("--calib is required");
    const CalibProjection cal = *load_calib(calib);
    std::vector<GroundTruthBox> boxes;
    for (const auto& l : io::read_kitti_tracking_labels(gt)) {
      if (l.type != cls) continue;
      try {
        boxes.push_back(io::to_ground_truth(l, cal));
      } catch (const Error&) {
      }
    }
    std::vector<Anchor> anchors;
    try {
      anchors = cluster_anchors(boxes, count, ClusterOptions{iterations});
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    std::ofstream file;
    if (!output.empty()) file = io::open_output(output);
    io::write_anchors(output.empty() ? std::cout : file, anchors);
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kin3d: monocular 3D detection tracking, forecasting and evaluation"};
  app.require_subcommand(1);

  TrackCmd track;
  auto* t = app.add_subcommand("track", "detections + ego-motion -> track dump");
  t->add_option("--detections", track.detections, "detections file")->required();
  t->add_option("--ego", track.ego, "ego-motion file (frame gx gy gz rx ry rz)");
  t->add_option("--calib", track.calib, "KITTI calibration; enables projected 2D association");
  t->add_option("--output,-o", track.output, "track dump path (default stdout)");
  t->add_option("--class", track.cls, "object class to track");
  track.cfg.add_to(*t);

  EvaluateCmd eval;
  auto* e = app.add_subcommand("evaluate", "detections or tracks + ground truth -> metric table");
  e->add_option("--detections", eval.detections, "detections file");
  e->add_option("--tracks", eval.tracks, "track dump");
  e->add_option("--gt", eval.gt, "ground truth in KITTI tracking label format");
  e->add_option("--calib", eval.calib, "KITTI calibration, needed for 2D AP of tracks");
  e->add_option("--json", eval.json_path, "write one JSON object per metric to this path");
  e->add_option("--class", eval.cls, "object class to score");
  e->add_option("--score", eval.score, "ranking score for detections: fused or class");
  e->add_flag("--include-coasting", eval.include_coasting, "score coasting tracks too");
  eval.cfg.add_to(*e);

  SimulateCmd sim;
  auto* s = app.add_subcommand("simulate", "seeded scenario -> detections.txt, ego.txt, gt.txt, calib.txt");
  s->add_option("--out-dir,-o", sim.out_dir, "output directory");
  s->add_option("--seed", sim.seed, "random seed");
  s->add_option("--objects", sim.objects, "number of objects")->check(CLI::NonNegativeNumber);
  s->add_option("--frames", sim.frames, "number of frames")->check(CLI::PositiveNumber);
  s->add_option("--sigma-center", sim.sigma_center, "center noise per axis, meters");
  s->add_option("--sigma-dims", sim.sigma_dims, "dimension noise, meters");
  s->add_option("--sigma-yaw", sim.sigma_yaw, "yaw noise, radians");
  s->add_option("--score-min", sim.score_min, "lower bound of the class score");
  s->add_option("--score-max", sim.score_max, "upper bound of the class score");
  s->add_option("--speed-max", sim.speed_max, "largest object speed, meters per frame");
  s->add_option("--ego-translation", sim.ego_translation, "per-frame camera translation gx gy gz")->expected(3);
  s->add_option("--ego-rotation", sim.ego_rotation, "per-frame camera rotation rx ry rz")->expected(3);

  ForecastCmd fc;
  auto* f = app.add_subcommand("forecast", "simulate-style sequence directories -> forecast AP per n_f");
  f->add_option("--dir", fc.dirs, "sequence directory (repeatable)")->required();
  f->add_option("--max-nf", fc.max_nf, "largest forecast horizon");
  f->add_option("--history", fc.history, "frames tracked before forecasting");
  f->add_option("--frame-offset", fc.frame_offset, "evaluated frame counted back from the last frame");
  f->add_option("--iou", fc.iou, "2d, bev or 3d");
  f->add_option("--difficulty", fc.difficulty, "all, easy, moderate or hard");
  f->add_option("--json", fc.json_path, "write one JSON object per metric to this path");
  f->add_option("--class", fc.cls, "object class");
  fc.cfg.add_to(*f);

  AnchorsCmd an;
  auto* a = app.add_subcommand("anchors", "ground truth -> anchor table");
  a->add_option("--gt", an.gt, "ground truth in KITTI tracking label format")->required();
  a->add_option("--calib", an.calib, "KITTI calibration");
  a->add_option("--count", an.count, "number of anchors");
  a->add_option("--iterations", an.iterations, "clustering iterations");
  a->add_option("--output,-o", an.output, "anchor table path (default stdout)");
  a->add_option("--class", an.cls, "object class");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }

  try {
    if (app.got_subcommand(t)) return track.run();
    if (app.got_subcommand(e)) return eval.run();
    if (app.got_subcommand(s)) return sim.run();
    if (app.got_subcommand(f)) return fc.run();
    if (app.got_subcommand(a)) return an.run();
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return err.code() == Errc::IoError ? 2 : 1;
  }
  return 1;
}
