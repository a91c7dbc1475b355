#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Geometry>

#include "kin3d/anchors.hpp"
#include "kin3d/detection.hpp"
#include "kin3d/ego_motion.hpp"
#include "kin3d/error.hpp"
#include "kin3d/eval.hpp"
#include "kin3d/geometry.hpp"
#include "kin3d/tracker.hpp"

namespace kin3d::io {

// ---------------------------------------------------------------------------
// Tokenizing and number formatting
// ---------------------------------------------------------------------------

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f'; };
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

inline bool is_blank_or_comment(std::string_view line) {
  for (char c : line) {
    if (c == '#') return true;
    if (c != ' ' && c != '\t' && c != '\r') return false;
  }
  return true;
}

/// Finite decimal; non-finite values raise UnitError.
inline double parse_double(const Token& t, std::size_t line) {
  double v = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec == std::errc::result_out_of_range)
    throw ParseError(Errc::UnitError, line, t.column, "value out of range: '" + std::string(t.text) + "'");
  if (ec != std::errc() || ptr != last)
    throw ParseError(Errc::ParseError, line, t.column, "expected a number, got '" + std::string(t.text) + "'");
  if (!std::isfinite(v)) throw ParseError(Errc::UnitError, line, t.column, "non-finite value");
  return v;
}

inline long long parse_int(const Token& t, std::size_t line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
  if (ec != std::errc() || ptr != t.text.data() + t.text.size())
    throw ParseError(Errc::ParseError, line, t.column, "expected an integer, got '" + std::string(t.text) + "'");
  return v;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return read_lines(in);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// KITTI object labels
// ---------------------------------------------------------------------------

/// One KITTI label line. Location is stored as given; the cuboid center is that location.
struct KittiLabel {
  int frame = -1;     // tracking labels only
  int track_id = -1;  // tracking labels only
  std::string type;
  double truncated = 0;
  int occluded = 0;
  double alpha = 0;
  Box2D box2d;
  Cuboid3D cuboid;
  std::optional<double> score;

  bool dont_care() const { return type == "DontCare"; }
};

namespace detail {

/// Parses the 15 (or 16 with score) object fields starting at tokens[offset].
inline KittiLabel parse_object_fields(const std::vector<Token>& tk, std::size_t offset, std::size_t line) {
  const std::size_t n = tk.size() - offset;
  if (n != 15 && n != 16)
    throw ParseError(Errc::ParseError, line, 0,
                     "expected 15 or 16 label fields, got " + std::to_string(n));
  KittiLabel l;
  l.type = std::string(tk[offset].text);
  auto num = [&](std::size_t k) { return parse_double(tk[offset + k], line); };
  l.truncated = num(1);
  const long long occ = parse_int(tk[offset + 2], line);
  if (occ < -1 || occ > 3) throw ParseError(Errc::RangeError, line, tk[offset + 2].column, "occlusion outside [-1, 3]");
  l.occluded = static_cast<int>(occ);
  l.alpha = num(3);
  const double left = num(4), top = num(5), right = num(6), bottom = num(7);
  l.box2d = {left, top, right - left, bottom - top};
  l.cuboid.h3 = num(8);
  l.cuboid.w3 = num(9);
  l.cuboid.l3 = num(10);
  l.cuboid.x = num(11);
  l.cuboid.y = num(12);
  l.cuboid.z = num(13);
  l.cuboid.theta = wrap_angle(num(14));
  if (n == 16) l.score = num(15);
  if (!l.dont_care()) {
    if (!(l.cuboid.w3 > 0 && l.cuboid.h3 > 0 && l.cuboid.l3 > 0))
      throw ParseError(Errc::RangeError, line, tk[offset + 8].column, "object dimensions must be positive");
    if (!(l.box2d.w2 > 0 && l.box2d.h2 > 0))
      throw ParseError(Errc::RangeError, line, tk[offset + 4].column, "2D box must have positive size");
  }
  return l;
}

}  // namespace detail

/// `type truncated occluded alpha left top right bottom h w l x y z rotation_y [score]`
inline KittiLabel parse_kitti_label_line(std::string_view text, std::size_t line) {
  return detail::parse_object_fields(tokenize(text), 0, line);
}

inline std::vector<KittiLabel> parse_kitti_labels(std::istream& in) {
  std::vector<KittiLabel> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    out.push_back(parse_kitti_label_line(line, n));
  }
  return out;
}

inline std::vector<KittiLabel> read_kitti_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_kitti_labels(in);
}

/// Tracking labels: `frame track_id` followed by the object fields.
inline std::vector<KittiLabel> parse_kitti_tracking_labels(std::istream& in) {
  std::vector<KittiLabel> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto tk = tokenize(line);
    if (tk.size() < 2) throw ParseError(Errc::ParseError, n, 0, "missing frame and track id");
    KittiLabel l = detail::parse_object_fields(tk, 2, n);
    l.frame = static_cast<int>(parse_int(tk[0], n));
    l.track_id = static_cast<int>(parse_int(tk[1], n));
    out.push_back(std::move(l));
  }
  return out;
}

inline std::vector<KittiLabel> read_kitti_tracking_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_kitti_tracking_labels(in);
}

inline void write_kitti_object_fields(std::ostream& out, const KittiLabel& l) {
  out << l.type << ' ' << format_double(l.truncated) << ' ' << l.occluded << ' ' << format_double(l.alpha) << ' '
      << format_double(l.box2d.x) << ' ' << format_double(l.box2d.y) << ' ' << format_double(l.box2d.right()) << ' '
      << format_double(l.box2d.bottom()) << ' ' << format_double(l.cuboid.h3) << ' ' << format_double(l.cuboid.w3)
      << ' ' << format_double(l.cuboid.l3) << ' ' << format_double(l.cuboid.x) << ' ' << format_double(l.cuboid.y)
      << ' ' << format_double(l.cuboid.z) << ' ' << format_double(l.cuboid.theta);
  if (l.score) out << ' ' << format_double(*l.score);
}

inline void write_kitti_tracking_labels(std::ostream& out, const std::vector<KittiLabel>& labels) {
  for (const auto& l : labels) {
    out << l.frame << ' ' << l.track_id << ' ';
    write_kitti_object_fields(out, l);
    out << '\n';
  }
}

/// Regression-side view of a label; the projected center comes from the calibration.
inline GroundTruthBox to_ground_truth(const KittiLabel& l, const CalibProjection& calib) {
  const Projection p = project_center(l.cuboid.center(), calib);
  GroundTruthBox g;
  g.box2d = l.box2d;
  g.u = p.u;
  g.v = p.v;
  g.z = p.z;
  g.w3 = l.cuboid.w3;
  g.h3 = l.cuboid.h3;
  g.l3 = l.cuboid.l3;
  g.theta = l.cuboid.theta;
  g.label = l.dont_care() ? 0 : 1;
  g.occlusion = l.occluded;
  g.truncation = l.truncated;
  return g;
}

inline EvalGroundTruth to_eval(const KittiLabel& l) {
  return {l.frame, l.cuboid, l.box2d, l.occluded, l.truncated};
}

// ---------------------------------------------------------------------------
// KITTI calibration
// ---------------------------------------------------------------------------

/// Named rows of a KITTI calibration file (`P0: ...`, `R0_rect: ...`, `Tr_velo_to_cam: ...`).
struct KittiCalib {
  std::map<std::string, std::vector<double>> rows;

  bool has(const std::string& key) const { return rows.contains(key); }

  const std::vector<double>& row(const std::string& key) const {
    const auto it = rows.find(key);
    if (it == rows.end()) throw Error(Errc::ParseError, "calibration has no '" + key + "' row");
    return it->second;
  }

  CalibProjection projection(const std::string& key = "P2") const {
    const auto& r = row(key);
    if (r.size() != 12) throw Error(Errc::ParseError, "'" + key + "' must hold 12 values");
    CalibProjection c;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) c.upsilon(i, j) = r[4 * i + j];
    c.validate();
    return c;
  }

  /// Rigid 3x4 row as an isometry.
  Eigen::Isometry3d rigid(const std::string& key) const {
    const auto& r = row(key);
    if (r.size() != 12) throw Error(Errc::ParseError, "'" + key + "' must hold 12 values");
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) t.matrix()(i, j) = r[4 * i + j];
    return t;
  }

  /// IMU-to-camera extrinsic. Uses Tr_velo_to_cam · Tr_imu_to_velo (with R0_rect when present);
  /// without them falls back to the axis change x_cam = -y_imu, y_cam = -z_imu, z_cam = x_imu.
  Eigen::Isometry3d imu_to_camera() const {
    if (has("Tr_imu_to_velo") && has("Tr_velo_to_cam")) {
      Eigen::Isometry3d t = rigid("Tr_velo_to_cam") * rigid("Tr_imu_to_velo");
      if (has("R0_rect")) {
        const auto& r = row("R0_rect");
        if (r.size() != 9) throw Error(Errc::ParseError, "'R0_rect' must hold 9 values");
        Eigen::Isometry3d rect = Eigen::Isometry3d::Identity();
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) rect.matrix()(i, j) = r[3 * i + j];
        t = rect * t;
      }
      return t;
    }
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() << 0, -1, 0,  //
        0, 0, -1,            //
        1, 0, 0;
    return t;
  }
};

inline KittiCalib parse_kitti_calib(std::istream& in) {
  KittiCalib c;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto tk = tokenize(line);
    std::string key(tk[0].text);
    std::size_t first = 1;
    if (!key.empty() && key.back() == ':') {
      key.pop_back();
    } else if (tk.size() > 1 && tk[1].text == ":") {
      first = 2;
    } else {
      throw ParseError(Errc::ParseError, n, tk[0].column, "expected 'name:' at the start of the row");
    }
    if (key.empty()) throw ParseError(Errc::ParseError, n, tk[0].column, "empty calibration row name");
    std::vector<double> values;
    for (std::size_t k = first; k < tk.size(); ++k) values.push_back(parse_double(tk[k], n));
    c.rows[key] = std::move(values);
  }
  return c;
}

inline KittiCalib read_kitti_calib(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_kitti_calib(in);
}

inline void write_kitti_calib(std::ostream& out, const CalibProjection& p2) {
  std::string row;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) row += ' ' + format_double(p2.upsilon(i, j));
  for (const char* key : {"P0", "P1", "P2", "P3"}) out << key << ':' << row << '\n';
}

// ---------------------------------------------------------------------------
// KITTI oxts
// ---------------------------------------------------------------------------

/// GPS/IMU record: lat, lon (degrees), alt (m), roll, pitch, yaw (rad), then the
/// remaining devkit fields.
struct OxtsPose {
  double lat = 0, lon = 0, alt = 0;
  double roll = 0, pitch = 0, yaw = 0;
  std::vector<double> rest;
};

inline OxtsPose parse_oxts_line(std::string_view text, std::size_t line) {
  const auto tk = tokenize(text);
  if (tk.size() < 6) throw ParseError(Errc::ParseError, line, 0, "oxts record needs at least 6 fields");
  OxtsPose p;
  p.lat = parse_double(tk[0], line);
  p.lon = parse_double(tk[1], line);
  p.alt = parse_double(tk[2], line);
  p.roll = parse_double(tk[3], line);
  p.pitch = parse_double(tk[4], line);
  p.yaw = parse_double(tk[5], line);
  if (std::abs(p.lat) > 90.0) throw ParseError(Errc::RangeError, line, tk[0].column, "latitude outside [-90, 90]");
  for (std::size_t k = 6; k < tk.size(); ++k) p.rest.push_back(parse_double(tk[k], line));
  return p;
}

inline std::vector<OxtsPose> parse_oxts(std::istream& in) {
  std::vector<OxtsPose> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    out.push_back(parse_oxts_line(line, n));
  }
  return out;
}

/// A KITTI oxts file holds one record; this reads every record in the file.
inline std::vector<OxtsPose> read_kitti_oxts(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_oxts(in);
}

/// IMU pose in a local Mercator frame scaled at `scale_lat` (degrees).
inline Eigen::Isometry3d oxts_pose_to_world(const OxtsPose& p, double scale_lat) {
  constexpr double kEarthRadius = 6378137.0;
  const double scale = std::cos(scale_lat * kPi / 180.0);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translation() << scale * kEarthRadius * p.lon * kPi / 180.0,
      scale * kEarthRadius * std::log(std::tan((90.0 + p.lat) * kPi / 360.0)), p.alt;
  t.linear() = rotation_from_euler(Vec3(p.roll, p.pitch, p.yaw));
  return t;
}

/// Camera motion between two consecutive oxts records: maps camera(t-1) into camera(t).
inline EgoMotion ego_from_oxts(const OxtsPose& prev, const OxtsPose& curr,
                               const Eigen::Isometry3d& imu_to_cam = KittiCalib{}.imu_to_camera()) {
  const Eigen::Isometry3d w_prev = oxts_pose_to_world(prev, prev.lat);
  const Eigen::Isometry3d w_curr = oxts_pose_to_world(curr, prev.lat);
  const Eigen::Isometry3d imu_rel = w_curr.inverse() * w_prev;
  const Eigen::Isometry3d cam_rel = imu_to_cam * imu_rel * imu_to_cam.inverse();
  EgoMotion e;
  e.gamma = cam_rel.translation();
  e.rho = euler_from_rotation(cam_rel.linear());
  return e;
}

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

/// `frame label score [omega] x2 y2 w2 h2 x y z w3 h3 l3 theta`
/// (x2, y2) is the top-left image corner, (x, y, z) the cuboid center. omega defaults to 1.
inline std::vector<FrameRecord> parse_detections(std::istream& in) {
  std::vector<FrameRecord> frames;
  std::map<int, std::size_t> index;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto tk = tokenize(line);
    if (tk.size() != 14 && tk.size() != 15)
      throw ParseError(Errc::ParseError, n, 0, "expected 14 or 15 fields, got " + std::to_string(tk.size()));
    const bool has_omega = tk.size() == 15;
    const long long frame = parse_int(tk[0], n);
    if (frame < 0 || frame > std::numeric_limits<int>::max())
      throw ParseError(Errc::RangeError, n, tk[0].column, "frame index out of range");
    Detection d;
    d.label = std::string(tk[1].text);
    d.score = parse_double(tk[2], n);
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw ParseError(Errc::RangeError, n, tk[2].column, "score outside [0, 1]");
    std::size_t k = 3;
    if (has_omega) {
      d.omega = parse_double(tk[k], n);
      if (!(d.omega >= 0.0 && d.omega <= 1.0))
        throw ParseError(Errc::RangeError, n, tk[k].column, "omega outside [0, 1]");
      ++k;
    }
    d.mu = fuse_score(d.score, d.omega);
    auto num = [&](std::size_t j) { return parse_double(tk[k + j], n); };
    d.box2d = {num(0), num(1), num(2), num(3)};
    d.cuboid = {num(4), num(5), num(6), num(7), num(8), num(9), wrap_angle(num(10))};
    if (!(d.box2d.w2 > 0 && d.box2d.h2 > 0)) throw ParseError(Errc::RangeError, n, tk[k + 2].column, "2D box must have positive size");
    if (!(d.cuboid.w3 > 0 && d.cuboid.h3 > 0 && d.cuboid.l3 > 0))
      throw ParseError(Errc::RangeError, n, tk[k + 7].column, "cuboid dimensions must be positive");

    const int f = static_cast<int>(frame);
    auto it = index.find(f);
    if (it == index.end()) {
      it = index.emplace(f, frames.size()).first;
      frames.push_back({f, {}, std::nullopt, {}});
    }
    frames[it->second].detections.push_back(std::move(d));
  }
  std::stable_sort(frames.begin(), frames.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
  return frames;
}

inline std::vector<FrameRecord> read_detections(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_detections(in);
}

inline void write_detections(std::ostream& out, const std::vector<FrameRecord>& frames) {
  for (const auto& f : frames)
    for (const auto& d : f.detections) {
      out << f.frame << ' ' << d.label << ' ' << format_double(d.score) << ' ' << format_double(d.omega);
      for (double v : {d.box2d.x, d.box2d.y, d.box2d.w2, d.box2d.h2, d.cuboid.x, d.cuboid.y, d.cuboid.z, d.cuboid.w3,
                       d.cuboid.h3, d.cuboid.l3, d.cuboid.theta})
        out << ' ' << format_double(v);
      out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Ego-motion table
// ---------------------------------------------------------------------------

/// `frame gamma_x gamma_y gamma_z rho_x rho_y rho_z`; the motion maps frame-1 into frame.
inline std::map<int, EgoMotion> parse_ego(std::istream& in) {
  std::map<int, EgoMotion> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto tk = tokenize(line);
    if (tk.size() != 7) throw ParseError(Errc::ParseError, n, 0, "expected 7 fields, got " + std::to_string(tk.size()));
    const long long frame = parse_int(tk[0], n);
    if (frame < 0 || frame > std::numeric_limits<int>::max())
      throw ParseError(Errc::RangeError, n, tk[0].column, "frame index out of range");
    EgoMotion e;
    for (int k = 0; k < 3; ++k) e.gamma[k] = parse_double(tk[1 + k], n);
    for (int k = 0; k < 3; ++k) e.rho[k] = wrap_angle(parse_double(tk[4 + k], n));
    out[static_cast<int>(frame)] = e;
  }
  return out;
}

inline std::map<int, EgoMotion> read_ego(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_ego(in);
}

inline void write_ego(std::ostream& out, const std::map<int, EgoMotion>& egos) {
  for (const auto& [f, e] : egos) {
    out << f;
    for (int k = 0; k < 3; ++k) out << ' ' << format_double(e.gamma[k]);
    for (int k = 0; k < 3; ++k) out << ' ' << format_double(e.rho[k]);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Ego maps
// ---------------------------------------------------------------------------

/// First line `width height`, then seven blocks of `height` rows by `width` values:
/// Γx, Γy, Γz, Px, Py, Pz and the confidence logits.
inline EgoMaps parse_ego_maps(std::istream& in) {
  std::vector<std::pair<std::size_t, std::string>> rows;
  std::size_t n = 0;
  for (auto& line : read_lines(in)) {
    ++n;
    if (!is_blank_or_comment(line)) rows.emplace_back(n, std::move(line));
  }
  if (rows.empty()) throw ParseError(Errc::ParseError, 1, 0, "missing 'width height' header");
  const auto head = tokenize(rows[0].second);
  if (head.size() != 2) throw ParseError(Errc::ParseError, rows[0].first, 0, "header must be 'width height'");
  const long long w = parse_int(head[0], rows[0].first);
  const long long h = parse_int(head[1], rows[0].first);
  if (w < 1 || h < 1 || w > 100000 || h > 100000)
    throw ParseError(Errc::RangeError, rows[0].first, 0, "map size out of range");
  if (rows.size() != 1 + 7 * static_cast<std::size_t>(h))
    throw ParseError(Errc::ParseError, rows.back().first, 0, "expected " + std::to_string(7 * h) + " map rows");
  std::array<Eigen::ArrayXXd, 7> maps;
  for (int c = 0; c < 7; ++c) {
    maps[c].resize(h, w);
    for (long long r = 0; r < h; ++r) {
      const auto& [ln, text] = rows[1 + c * h + r];
      const auto tk = tokenize(text);
      if (tk.size() != static_cast<std::size_t>(w))
        throw ParseError(Errc::ParseError, ln, 0, "expected " + std::to_string(w) + " values");
      for (long long x = 0; x < w; ++x) maps[c](r, x) = parse_double(tk[x], ln);
    }
  }
  EgoMaps m;
  for (int k = 0; k < 3; ++k) {
    m.gamma[k] = maps[k];
    m.rho[k] = maps[3 + k];
  }
  m.conf = maps[6];
  return m;
}

// ---------------------------------------------------------------------------
// Track dumps
// ---------------------------------------------------------------------------

/// One record per (frame, track):
/// `frame id x y z w h l theta theta_h v mu mph coasting`
struct TrackRecord {
  int frame = 0;
  std::int64_t id = 0;
  State9 state = State9::Zero();
  double mu = 0;
  double mph = 0;
  bool coasting = false;

  Cuboid3D cuboid() const {
    return {state[kX], state[kY], state[kZ], state[kW], state[kH], state[kL],
            measurement_theta_merge(state[kTheta], state[kHeading])};
  }
};

inline TrackRecord to_record(const TrackState& t, int frame, double frame_rate) {
  return {frame, t.id, t.state, t.mu, velocity_to_mph(t.state[kVel], frame_rate), t.coasting};
}

inline void write_track_record(std::ostream& out, const TrackRecord& r) {
  out << r.frame << ' ' << r.id;
  for (int k = 0; k < 9; ++k) out << ' ' << format_double(r.state[k]);
  out << ' ' << format_double(r.mu) << ' ' << format_double(r.mph) << ' ' << (r.coasting ? 1 : 0) << '\n';
}

inline std::vector<TrackRecord> parse_tracks(std::istream& in) {
  std::vector<TrackRecord> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto tk = tokenize(line);
    if (tk.size() != 14) throw ParseError(Errc::ParseError, n, 0, "expected 14 fields, got " + std::to_string(tk.size()));
    TrackRecord r;
    r.frame = static_cast<int>(std::clamp<long long>(parse_int(tk[0], n), 0, std::numeric_limits<int>::max()));
    r.id = parse_int(tk[1], n);
    for (int k = 0; k < 9; ++k) r.state[k] = parse_double(tk[2 + k], n);
    r.mu = parse_double(tk[11], n);
    if (!(r.mu >= 0.0 && r.mu <= 1.0)) throw ParseError(Errc::RangeError, n, tk[11].column, "mu outside [0, 1]");
    r.mph = parse_double(tk[12], n);
    const long long c = parse_int(tk[13], n);
    if (c != 0 && c != 1) throw ParseError(Errc::RangeError, n, tk[13].column, "coasting flag must be 0 or 1");
    r.coasting = c == 1;
    for (int d : {kW, kH, kL})
      if (!(r.state[d] > 0)) throw ParseError(Errc::RangeError, n, tk[2 + d].column, "dimensions must be positive");
    out.push_back(r);
  }
  return out;
}

inline std::vector<TrackRecord> read_tracks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_tracks(in);
}

// ---------------------------------------------------------------------------
// Anchor table
// ---------------------------------------------------------------------------

/// One anchor per line: `w2 h2 z w3 h3 l3 theta0 theta1`.
inline void write_anchors(std::ostream& out, const std::vector<Anchor>& anchors) {
  for (const auto& a : anchors)
    out << format_double(a.w2) << ' ' << format_double(a.h2) << ' ' << format_double(a.z) << ' '
        << format_double(a.w3) << ' ' << format_double(a.h3) << ' ' << format_double(a.l3) << ' '
        << format_double(a.theta0) << ' ' << format_double(a.theta1) << '\n';
}

inline std::vector<Anchor> parse_anchors(std::istream& in) {
  std::vector<Anchor> out;
  std::size_t n = 0;
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto tk = tokenize(line);
    if (tk.size() != 8) throw ParseError(Errc::ParseError, n, 0, "expected 8 anchor fields");
    Anchor a;
    double* fields[] = {&a.w2, &a.h2, &a.z, &a.w3, &a.h3, &a.l3, &a.theta0, &a.theta1};
    for (int k = 0; k < 8; ++k) *fields[k] = parse_double(tk[k], n);
    for (int k = 0; k < 6; ++k)
      if (!(*fields[k] > 0)) throw ParseError(Errc::RangeError, n, tk[k].column, "anchor sizes must be positive");
    out.push_back(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// key=value configuration
// ---------------------------------------------------------------------------

inline std::map<std::string, std::string> parse_config(std::istream& in) {
  std::map<std::string, std::string> out;
  std::size_t n = 0;
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  for (const auto& line : read_lines(in)) {
    ++n;
    if (is_blank_or_comment(line)) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(Errc::ParseError, n, 0, "expected key=value");
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ParseError(Errc::ParseError, n, 1, "empty key");
    out[std::string(key)] = std::string(value);
  }
  return out;
}

inline std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path + "'");
  return parse_config(in);
}

namespace detail {

inline double config_double(const std::string& key, const std::string& value) {
  try {
    return parse_double({value, 1}, 1);
  } catch (const Error&) {
    throw Error(Errc::RangeError, "config key '" + key + "' expects a number, got '" + value + "'");
  }
}

inline std::vector<double> config_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto tk = tokenize(item);
    if (tk.size() != 1) throw Error(Errc::RangeError, "config key '" + key + "' expects a comma-separated list");
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tk[0].text.data(), tk[0].text.data() + tk[0].text.size(), v);
    if (ec != std::errc() || ptr != tk[0].text.data() + tk[0].text.size())
      throw Error(Errc::RangeError, "config key '" + key + "' has a bad list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

inline Difficulty parse_difficulty(const std::string& s) {
  if (s == "all") return Difficulty::all;
  if (s == "easy") return Difficulty::easy;
  if (s == "moderate") return Difficulty::moderate;
  if (s == "hard") return Difficulty::hard;
  throw Error(Errc::RangeError, "unknown difficulty '" + s + "'");
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{"lambda_o",       "k_d",        "k_u",          "k_p",
                                             "k_m",            "frame_rate", "iou_thresholds", "depth_bins",
                                             "n_recall_points", "difficulties"};
  return keys;
}

/// Applies one key=value pair; unknown keys and malformed values raise RangeError.
inline void apply_config_value(const std::string& key, const std::string& value, TrackerConfig& tc, EvalConfig& ec) {
  if (key == "lambda_o") tc.lambda_o = detail::config_double(key, value);
  else if (key == "k_d") tc.k_d = detail::config_double(key, value);
  else if (key == "k_u") tc.k_u = detail::config_double(key, value);
  else if (key == "k_p") tc.k_p = detail::config_double(key, value);
  else if (key == "k_m") tc.k_m = detail::config_double(key, value);
  else if (key == "frame_rate") tc.frame_rate = detail::config_double(key, value);
  else if (key == "iou_thresholds") ec.iou_thresholds = detail::config_list(key, value);
  else if (key == "depth_bins") ec.depth_bins = detail::config_list(key, value);
  else if (key == "n_recall_points") {
    const double v = detail::config_double(key, value);
    if (v != std::floor(v) || v < 1 || v > 1e6) throw Error(Errc::RangeError, "n_recall_points must be a positive integer");
    ec.n_recall_points = static_cast<int>(v);
  } else if (key == "difficulties") {
    ec.difficulties.clear();
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto tk = tokenize(item);
      if (tk.size() != 1) throw Error(Errc::RangeError, "difficulties expects a comma-separated list");
      ec.difficulties.push_back(detail::parse_difficulty(std::string(tk[0].text)));
    }
  } else {
    throw Error(Errc::RangeError, "unknown config key '" + key + "'");
  }
}

inline void apply_config(const std::map<std::string, std::string>& kv, TrackerConfig& tc, EvalConfig& ec) {
  for (const auto& [k, v] : kv) apply_config_value(k, v, tc, ec);
  tc.validate();
  ec.validate();
}

}  // namespace kin3d::io
