#pragma once

// KITTI 3D object label and calibration files.
//
// Label line: type truncated occluded alpha x1 y1 x2 y2 h w l x y z rotation_y [score]
// The location is the bottom center of the box in camera coordinates.
// Calibration: "KEY: v0 v1 ..." lines; only P2 is read.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ddepth/boxgeom.hpp"
#include "ddepth/combiner.hpp"
#include "ddepth/depthsolver.hpp"
#include "ddepth/errors.hpp"
#include "ddepth/simulate.hpp"

namespace ddepth {

struct KittiLabel {
  std::string type;
  double truncated = 0.0;
  int occluded = 0;
  double alpha = 0.0;
  std::array<double, 4> bbox2d{};  // left, top, right, bottom
  Dimensions dims;                 // h, w, l
  Vec3 location = Vec3::Zero();    // bottom center
  double rotation_y = 0.0;
  std::optional<double> score;
};

struct KittiCalib {
  std::array<double, 12> p2{};  // row-major 3x4

  double at(std::size_t row, std::size_t col) const { return p2[row * 4 + col]; }

  /// Drops P2's translation column.
  CameraIntrinsics intrinsics() const { return {at(0, 0), at(1, 1), at(0, 2), at(1, 2)}; }
};

namespace detail {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  const auto space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (i < line.size()) {
    while (i < line.size() && space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !space(line[i])) ++i;
    if (i > start) out.push_back({line.substr(start, i - start), start + 1});
  }
  return out;
}

inline double parse_real(const Token& t, std::size_t line_no) {
  double v = 0.0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ParseError("expected a number, got '" + std::string(t.text) + "'", line_no, t.column);
  return v;
}

inline int parse_int(const Token& t, std::size_t line_no) {
  int v = 0;
  const char* first = t.text.data();
  const char* last = first + t.text.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ParseError("expected an integer, got '" + std::string(t.text) + "'", line_no, t.column);
  return v;
}

}  // namespace detail

inline KittiLabel parse_label_line(std::string_view line, std::size_t line_no = 1) {
  const auto tok = detail::tokenize(line);
  if (tok.size() != 15 && tok.size() != 16)
    throw ParseError("expected 15 or 16 fields, got " + std::to_string(tok.size()), line_no,
                     tok.empty() ? 1 : tok.back().column);
  const auto real = [&](std::size_t i) { return detail::parse_real(tok[i], line_no); };
  KittiLabel l;
  l.type = std::string(tok[0].text);
  l.truncated = real(1);
  l.occluded = detail::parse_int(tok[2], line_no);
  l.alpha = real(3);
  for (std::size_t i = 0; i < 4; ++i) l.bbox2d[i] = real(4 + i);
  l.dims = {real(8), real(9), real(10)};
  l.location = Vec3(real(11), real(12), real(13));
  l.rotation_y = real(14);
  if (tok.size() == 16) l.score = real(15);
  return l;
}

inline std::string format_label_line(const KittiLabel& l) {
  std::string out = l.type;
  const auto put = [&out](double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    out += ' ';
    out.append(buf, res.ptr);
  };
  put(l.truncated);
  out += ' ' + std::to_string(l.occluded);
  put(l.alpha);
  for (double b : l.bbox2d) put(b);
  put(l.dims.h);
  put(l.dims.w);
  put(l.dims.l);
  put(l.location.x());
  put(l.location.y());
  put(l.location.z());
  put(l.rotation_y);
  if (l.score) put(*l.score);
  return out;
}

struct LabelFile {
  struct Entry {
    std::size_t line = 0;
    KittiLabel label;
  };
  std::vector<Entry> labels;
  std::vector<ParseError> errors;
};

/// Parses every non-blank line; each yields a label or a located error.
inline LabelFile parse_label_file(std::string_view text) {
  LabelFile out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    if (!detail::tokenize(line).empty()) {
      try {
        out.labels.push_back({line_no, parse_label_line(line, line_no)});
      } catch (const ParseError& e) {
        out.errors.push_back(e);
      }
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  return out;
}

inline KittiCalib parse_calib(std::string_view text) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const auto tok = detail::tokenize(text.substr(pos, end - pos));
    ++line_no;
    if (!tok.empty() && tok[0].text == "P2:") {
      if (tok.size() != 13)
        throw ParseError("P2 needs 12 values, got " + std::to_string(tok.size() - 1), line_no,
                         tok.back().column);
      KittiCalib c;
      for (std::size_t i = 0; i < 12; ++i) c.p2[i] = detail::parse_real(tok[i + 1], line_no);
      if (!(c.at(0, 0) > 0.0) || !(c.at(1, 1) > 0.0))
        throw ParseError("P2 focal lengths must be positive", line_no, tok[1].column);
      return c;
    }
    if (end == text.size()) break;
    pos = end + 1;
  }
  throw ParseError("missing P2 line", line_no, 1);
}

inline bool is_localizable(const KittiLabel& l) {
  return l.dims.valid() && std::isfinite(l.rotation_y) && l.location.allFinite() &&
         l.location.z() > 0.0 && l.location.x() > -999.0 && l.location.y() > -999.0;
}

/// Geometric-center box from a label (shifts the bottom center up by h/2).
inline Box3D label_to_box(const KittiLabel& l) {
  if (!is_localizable(l)) throw GeometryError("non-localizable label (" + l.type + ")");
  Box3D b;
  b.center = Vec3(l.location.x(), l.location.y() - 0.5 * l.dims.h, l.location.z());
  b.dims = l.dims;
  b.yaw = l.rotation_y;
  return b;
}

/// Inverse of label_to_box for the geometric fields; alpha is recomputed.
inline KittiLabel box_to_label(const Box3D& b, KittiLabel base = {}) {
  base.dims = b.dims;
  base.location = Vec3(b.center.x(), b.center.y() + 0.5 * b.dims.h, b.center.z());
  base.rotation_y = b.yaw;
  base.alpha = alpha_from_yaw(b.yaw, b.center.x(), b.center.z());
  return base;
}

struct RoundtripObject {
  std::size_t label_index = 0;
  std::string type;
  double z_true = 0.0;
  double z_combined = 0.0;
  double abs_error = 0.0;
  std::size_t n_valid = 0;
  std::array<double, kNumDepths> source_error{};  // NaN where invalid
};

struct RoundtripReport {
  std::vector<RoundtripObject> objects;
  std::size_t skipped_non_localizable = 0;
  std::size_t skipped_unprojectable = 0;
};

/// Noiseless pass of real annotation geometry through the solver and
/// the robust combiner.
inline RoundtripReport roundtrip_eval(std::span<const KittiLabel> labels, const KittiCalib& calib) {
  const CameraIntrinsics k = calib.intrinsics();
  RoundtripReport rep;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!is_localizable(labels[i])) {
      ++rep.skipped_non_localizable;
      continue;
    }
    const Box3D box = label_to_box(labels[i]);
    ObjectObservation obs;
    try {
      obs = make_observation(box, k);
    } catch (const GeometryError&) {
      ++rep.skipped_unprojectable;
      continue;
    }
    const auto est = solve_all(obs, k);
    const FusionResult fused = select_and_combine(est);
    RoundtripObject o;
    o.label_index = i;
    o.type = labels[i].type;
    o.z_true = box.center.z();
    o.z_combined = fused.combined_depth;
    o.abs_error = std::abs(fused.combined_depth - o.z_true);
    for (std::size_t s = 0; s < kNumDepths; ++s) {
      o.source_error[s] = est[s].valid ? std::abs(est[s].value - o.z_true)
                                       : std::numeric_limits<double>::quiet_NaN();
      o.n_valid += est[s].valid ? 1U : 0U;
    }
    rep.objects.push_back(o);
  }
  return rep;
}

}  // namespace ddepth
