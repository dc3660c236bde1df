#pragma once

// JSON (de)serialization of experiment configs and scene fixtures.
//
// Config sections (all keys optional, defaults in parentheses elsewhere in
// the README):
//   "scene":    n_objects, seed, depth_range, height_range, width_range,
//               length_range, yaw_range, lateral_range, vertical_range
//               (each a [min, max] pair), intrinsics {fx, fy, cu, cv},
//               scene_file (load a previously exported scene instead)
//   "noise":    std_center, std_keypoint, std_height, std_dims, std_yaw,
//               std_direct_depth, direct_depth_relative, sigma_mode
//               ("propagated" | "calibrated" | "fixed"), fixed_sigma,
//               miscalibration_factor, calibration_objects
//   "collapse": target, kind ("multiply" | "add"), magnitude, fraction,
//               honest_sigma
// Unknown keys are rejected so typos surface as errors.

#include <array>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"

#include "ddepth/errors.hpp"
#include "ddepth/simulate.hpp"

namespace ddepth {

using nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::string_view section,
                                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(section) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, std::string_view section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

inline void read_range(const json& j, std::string_view section, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(std::string(section) + "." + key + ": expected [min, max]");
  r = {v[0].get<double>(), v[1].get<double>()};
}

inline json range_json(const Range& r) { return json::array({r.min, r.max}); }

inline json pixel_json(const Pixel& p) { return json::array({p.u, p.v}); }

inline Pixel pixel_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("scene file: expected [u, v]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::string to_string(SigmaMode m) {
  switch (m) {
    case SigmaMode::Propagated: return "propagated";
    case SigmaMode::Calibrated: return "calibrated";
    case SigmaMode::Fixed: return "fixed";
  }
  return "?";
}

}  // namespace detail

inline json intrinsics_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cu", k.cu}, {"cv", k.cv}};
}

inline CameraIntrinsics intrinsics_from_json(const json& j) {
  detail::reject_unknown_keys(j, "intrinsics", {"fx", "fy", "cu", "cv"});
  CameraIntrinsics k;
  detail::read(j, "intrinsics", "fx", k.fx);
  detail::read(j, "intrinsics", "fy", k.fy);
  detail::read(j, "intrinsics", "cu", k.cu);
  detail::read(j, "intrinsics", "cv", k.cv);
  return k;
}

inline json scene_config_json(const SceneConfig& c) {
  return {{"n_objects", c.n_objects},
          {"seed", c.seed},
          {"depth_range", detail::range_json(c.depth_range)},
          {"height_range", detail::range_json(c.height_range)},
          {"width_range", detail::range_json(c.width_range)},
          {"length_range", detail::range_json(c.length_range)},
          {"yaw_range", detail::range_json(c.yaw_range)},
          {"lateral_range", detail::range_json(c.lateral_range)},
          {"vertical_range", detail::range_json(c.vertical_range)},
          {"intrinsics", intrinsics_json(c.intrinsics)}};
}

/// Parses a "scene" section; `scene_file` (if any) is returned separately.
inline SceneConfig scene_config_from_json(const json& j, std::string* scene_file = nullptr) {
  constexpr std::string_view s = "scene";
  detail::reject_unknown_keys(j, s,
                              {"n_objects", "seed", "depth_range", "height_range", "width_range",
                               "length_range", "yaw_range", "lateral_range", "vertical_range",
                               "intrinsics", "scene_file"});
  SceneConfig c;
  detail::read(j, s, "n_objects", c.n_objects);
  detail::read(j, s, "seed", c.seed);
  detail::read_range(j, s, "depth_range", c.depth_range);
  detail::read_range(j, s, "height_range", c.height_range);
  detail::read_range(j, s, "width_range", c.width_range);
  detail::read_range(j, s, "length_range", c.length_range);
  detail::read_range(j, s, "yaw_range", c.yaw_range);
  detail::read_range(j, s, "lateral_range", c.lateral_range);
  detail::read_range(j, s, "vertical_range", c.vertical_range);
  if (j.contains("intrinsics")) c.intrinsics = intrinsics_from_json(j.at("intrinsics"));
  if (scene_file && j.contains("scene_file")) detail::read(j, s, "scene_file", *scene_file);
  c.validate();
  return c;
}

inline json noise_json(const NoiseModel& n) {
  return {{"std_center", n.std_center},
          {"std_keypoint", n.std_keypoint},
          {"std_height", n.std_height},
          {"std_dims", n.std_dims},
          {"std_yaw", n.std_yaw},
          {"std_direct_depth", n.std_direct_depth},
          {"direct_depth_relative", n.direct_depth_relative},
          {"sigma_mode", detail::to_string(n.sigma_mode)},
          {"fixed_sigma", n.fixed_sigma},
          {"miscalibration_factor", n.miscalibration_factor},
          {"calibration_objects", n.calibration_objects},
          {"calibration_replicates", n.calibration_replicates}};
}

/// Parses a "noise" section on top of `base`.
inline NoiseModel noise_from_json(const json& j, NoiseModel base = NoiseModel::desk_default()) {
  constexpr std::string_view s = "noise";
  detail::reject_unknown_keys(j, s,
                              {"std_center", "std_keypoint", "std_height", "std_dims", "std_yaw",
                               "std_direct_depth", "direct_depth_relative", "sigma_mode",
                               "fixed_sigma", "miscalibration_factor", "calibration_objects",
                               "calibration_replicates"});
  NoiseModel& n = base;
  detail::read(j, s, "std_center", n.std_center);
  detail::read(j, s, "std_keypoint", n.std_keypoint);
  detail::read(j, s, "std_height", n.std_height);
  detail::read(j, s, "std_dims", n.std_dims);
  detail::read(j, s, "std_yaw", n.std_yaw);
  detail::read(j, s, "std_direct_depth", n.std_direct_depth);
  detail::read(j, s, "direct_depth_relative", n.direct_depth_relative);
  detail::read(j, s, "fixed_sigma", n.fixed_sigma);
  detail::read(j, s, "miscalibration_factor", n.miscalibration_factor);
  detail::read(j, s, "calibration_objects", n.calibration_objects);
  detail::read(j, s, "calibration_replicates", n.calibration_replicates);
  if (j.contains("sigma_mode")) {
    std::string mode;
    detail::read(j, s, "sigma_mode", mode);
    if (mode == "propagated") n.sigma_mode = SigmaMode::Propagated;
    else if (mode == "calibrated") n.sigma_mode = SigmaMode::Calibrated;
    else if (mode == "fixed") n.sigma_mode = SigmaMode::Fixed;
    else throw ConfigError("noise.sigma_mode: unknown mode '" + mode + "'");
  }
  n.validate();
  return n;
}

inline json collapse_json(const CollapseSpec& c) {
  return {{"target", to_string(c.target)},
          {"kind", c.kind == CorruptionKind::Multiply ? "multiply" : "add"},
          {"magnitude", c.magnitude},
          {"fraction", c.fraction},
          {"honest_sigma", c.honest_sigma},
          {"overconfident", c.overconfident}};
}

inline CollapseSpec collapse_from_json(const json& j) {
  constexpr std::string_view s = "collapse";
  detail::reject_unknown_keys(j, s, {"target", "kind", "magnitude", "fraction", "honest_sigma", "overconfident"});
  CollapseSpec c;
  if (j.contains("target")) {
    std::string tag;
    detail::read(j, s, "target", tag);
    c.target = parse_collapse_target(tag);
  }
  if (j.contains("kind")) {
    std::string kind;
    detail::read(j, s, "kind", kind);
    if (kind == "multiply") c.kind = CorruptionKind::Multiply;
    else if (kind == "add") c.kind = CorruptionKind::Add;
    else throw ConfigError("collapse.kind: expected 'multiply' or 'add'");
  }
  detail::read(j, s, "magnitude", c.magnitude);
  detail::read(j, s, "fraction", c.fraction);
  detail::read(j, s, "honest_sigma", c.honest_sigma);
  detail::read(j, s, "overconfident", c.overconfident);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Scene fixtures

inline constexpr std::string_view kSceneFormat = "ddepth-scene/1";

inline json scene_json(const Scene& scene, const SceneConfig& cfg) {
  json objects = json::array();
  for (const auto& o : scene) {
    const auto& t = o.truth;
    const auto& ob = o.observation;
    json verts = json::array();
    for (const auto& p : ob.keypoints.vertices) verts.push_back(detail::pixel_json(p));
    objects.push_back(
        {{"truth",
          {{"center", {t.center.x(), t.center.y(), t.center.z()}},
           {"dims", {t.dims.h, t.dims.w, t.dims.l}},
           {"yaw", t.yaw}}},
         {"observation",
          {{"center_px", detail::pixel_json(ob.center_px)},
           {"vertices", verts},
           {"top_center", detail::pixel_json(ob.keypoints.top_center)},
           {"bottom_center", detail::pixel_json(ob.keypoints.bottom_center)},
           {"projected_center", detail::pixel_json(ob.keypoints.center)},
           {"heights", {ob.heights.corner[0], ob.heights.corner[1], ob.heights.corner[2],
                        ob.heights.corner[3], ob.heights.center}},
           {"dims", {ob.dims.h, ob.dims.w, ob.dims.l}},
           {"yaw", ob.yaw},
           {"direct_depth", ob.direct_depth},
           {"heatmap_score", ob.heatmap_score}}}});
  }
  return {{"format", kSceneFormat}, {"config", scene_config_json(cfg)}, {"objects", objects}};
}

/// Inverse of scene_json. Returns the stored objects; `cfg` receives the stored config.
inline Scene scene_from_json(const json& j, SceneConfig* cfg = nullptr) {
  try {
    if (j.at("format").get<std::string>() != kSceneFormat)
      throw ConfigError("scene file: unsupported format");
    if (cfg) *cfg = scene_config_from_json(j.at("config"));
    Scene scene;
    for (const auto& o : j.at("objects")) {
      SceneObject so;
      const auto& t = o.at("truth");
      so.truth.center = Vec3(t.at("center")[0], t.at("center")[1], t.at("center")[2]);
      so.truth.dims = {t.at("dims")[0], t.at("dims")[1], t.at("dims")[2]};
      so.truth.yaw = t.at("yaw");
      const auto& ob = o.at("observation");
      auto& obs = so.observation;
      obs.center_px = detail::pixel_from(ob.at("center_px"));
      const auto& verts = ob.at("vertices");
      if (verts.size() != kNumVertices) throw ConfigError("scene file: expected 8 vertices");
      for (std::size_t i = 0; i < kNumVertices; ++i) obs.keypoints.vertices[i] = detail::pixel_from(verts[i]);
      obs.keypoints.top_center = detail::pixel_from(ob.at("top_center"));
      obs.keypoints.bottom_center = detail::pixel_from(ob.at("bottom_center"));
      obs.keypoints.center = detail::pixel_from(ob.at("projected_center"));
      const auto& h = ob.at("heights");
      if (h.size() != 5) throw ConfigError("scene file: expected 5 heights");
      for (std::size_t i = 0; i < 4; ++i) obs.heights.corner[i] = h[i];
      obs.heights.center = h[4];
      obs.dims = {ob.at("dims")[0], ob.at("dims")[1], ob.at("dims")[2]};
      obs.yaw = ob.at("yaw");
      obs.direct_depth = ob.at("direct_depth");
      obs.heatmap_score = ob.value("heatmap_score", 1.0);
      scene.push_back(std::move(so));
    }
    return scene;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scene file: ") + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace ddepth
