#pragma once

// Deterministic synthetic scenes standing in for a trained detector.
//
// Every random draw comes from a generator seeded by derive_seed(master,
// stream, index), so per-object results never depend on iteration order.

#include <algorithm>
#include <array>
#include <bitset>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "ddepth/boxgeom.hpp"
#include "ddepth/depthsolver.hpp"
#include "ddepth/errors.hpp"

namespace ddepth {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30U)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27U)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31U);
}

/// Named random streams hanging off one master seed.
enum class SeedStream : std::uint64_t {
  Scene = 1,
  Noise = 2,
  Calibration = 3,
  CalibrationNoise = 4,
  Collapse = 5,
  Losses = 6,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream))) + index);
}

struct Range {
  double min = 0.0;
  double max = 0.0;

  bool valid() const noexcept { return std::isfinite(min) && std::isfinite(max) && min <= max; }
};

struct SceneConfig {
  std::size_t n_objects = 200;
  Range depth_range{5.0, 60.0};
  Range height_range{1.4, 1.8};
  Range width_range{1.5, 1.9};
  Range length_range{3.2, 4.8};
  Range yaw_range{-std::numbers::pi, std::numbers::pi};
  Range lateral_range{-12.0, 12.0};
  Range vertical_range{0.6, 1.1};  // camera-frame y of the box center
  CameraIntrinsics intrinsics{721.5377, 721.5377, 609.5593, 172.854};
  std::uint64_t seed = 20220601;

  void validate() const {
    if (n_objects < 1) throw ConfigError("scene: n_objects must be >= 1");
    for (const Range* r : {&depth_range, &height_range, &width_range, &length_range, &yaw_range,
                           &lateral_range, &vertical_range})
      if (!r->valid()) throw ConfigError("scene: every range needs finite min <= max");
    if (!(height_range.min > 0.0 && width_range.min > 0.0 && length_range.min > 0.0))
      throw ConfigError("scene: dimension ranges must be positive");
    if (!intrinsics.valid()) throw ConfigError("scene: intrinsics need fx > 0 and fy > 0");
  }
};

enum class SigmaMode { Propagated, Calibrated, Fixed };

struct NoiseModel {
  double std_center = 0.0;        // pixels
  double std_keypoint = 0.0;      // pixels
  double std_height = 0.0;        // pixels
  double std_dims = 0.0;          // meters
  double std_yaw = 0.0;           // radians
  double std_direct_depth = 0.0;  // meters, or a fraction of depth when relative
  bool direct_depth_relative = false;
  SigmaMode sigma_mode = SigmaMode::Propagated;
  double fixed_sigma = 1.0;  // meters, Fixed mode only
  double miscalibration_factor = 1.0;
  std::size_t calibration_objects = 1000;
  std::size_t calibration_replicates = 1;  // noise draws per calibration object

  /// The noise level used by the shipped experiments.
  static NoiseModel desk_default() {
    NoiseModel n;
    n.std_center = 0.5;
    n.std_keypoint = 2.0;
    n.std_height = 2.0;
    n.std_dims = 0.1;
    n.std_yaw = 0.05;
    n.std_direct_depth = 0.10;
    n.direct_depth_relative = true;
    return n;
  }

  void validate() const {
    for (double s : {std_center, std_keypoint, std_height, std_dims, std_yaw, std_direct_depth})
      if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("noise: stds must be finite and >= 0");
    if (!(miscalibration_factor > 0.0)) throw ConfigError("noise: miscalibration_factor must be > 0");
    if (sigma_mode == SigmaMode::Fixed && !(fixed_sigma > 0.0))
      throw ConfigError("noise: fixed_sigma must be > 0");
    if (calibration_replicates < 1) throw ConfigError("noise: calibration_replicates must be >= 1");
    if (sigma_mode == SigmaMode::Calibrated && calibration_objects < 1000)
      throw ConfigError("noise: calibration needs at least 1000 objects");
  }
};

struct SceneObject {
  Box3D truth;
  ObjectObservation observation;
};

using Scene = std::vector<SceneObject>;

/// Exact observation of a box: what a perfect detector would output.
inline ObjectObservation make_observation(const Box3D& box, const CameraIntrinsics& k) {
  const ProjectedBox pb = project_box(box, k);
  ObjectObservation obs;
  obs.center_px = pb.keypoints.center;
  obs.keypoints = pb.keypoints;
  obs.heights = pb.heights;
  obs.dims = box.dims;
  obs.yaw = box.yaw;
  obs.direct_depth = box.center.z();
  return obs;
}

inline constexpr std::size_t kMaxResamples = 1000;

inline Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Scene scene;
  scene.reserve(cfg.n_objects);
  const auto draw = [](std::mt19937_64& rng, const Range& r) {
    return r.min == r.max ? r.min : std::uniform_real_distribution<double>(r.min, r.max)(rng);
  };
  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, SeedStream::Scene, i));
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kMaxResamples && !placed; ++attempt) {
      Box3D box;
      box.dims = {draw(rng, cfg.height_range), draw(rng, cfg.width_range), draw(rng, cfg.length_range)};
      box.yaw = wrap_angle(draw(rng, cfg.yaw_range));
      box.center = Vec3(draw(rng, cfg.lateral_range), draw(rng, cfg.vertical_range),
                        draw(rng, cfg.depth_range));
      try {
        scene.push_back({box, make_observation(box, cfg.intrinsics)});
        placed = true;
      } catch (const GeometryError&) {
      }
    }
    if (!placed)
      throw ConfigError("scene: no projectable box for object " + std::to_string(i) + " after " +
                        std::to_string(kMaxResamples) + " draws");
  }
  return scene;
}

/// Adds independent zero-mean Gaussian noise to every observed quantity and
/// records the noise levels as the observation's reported sigmas.
inline ObjectObservation perturb(const ObjectObservation& obs, const NoiseModel& noise,
                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  const auto jitter = [&](double& x, double sd) { x += sd * n01(rng); };

  ObjectObservation out = obs;
  jitter(out.center_px.u, noise.std_center);
  jitter(out.center_px.v, noise.std_center);
  out.keypoints.center = out.center_px;
  for (auto& p : out.keypoints.vertices) {
    jitter(p.u, noise.std_keypoint);
    jitter(p.v, noise.std_keypoint);
  }
  for (Pixel* p : {&out.keypoints.top_center, &out.keypoints.bottom_center}) {
    jitter(p->u, noise.std_keypoint);
    jitter(p->v, noise.std_keypoint);
  }
  for (double& h : out.heights.corner) jitter(h, noise.std_height);
  jitter(out.heights.center, noise.std_height);
  for (double* d : {&out.dims.h, &out.dims.w, &out.dims.l}) {
    jitter(*d, noise.std_dims);
    *d = std::max(*d, 1e-3);
  }
  jitter(out.yaw, noise.std_yaw);
  const double depth_sd =
      noise.direct_depth_relative ? noise.std_direct_depth * obs.direct_depth : noise.std_direct_depth;
  jitter(out.direct_depth, depth_sd);

  out.sigmas.center = noise.std_center;
  out.sigmas.keypoint = noise.std_keypoint;
  out.sigmas.height = noise.std_height;
  out.sigmas.dims = {noise.std_dims, noise.std_dims, noise.std_dims};
  out.sigmas.yaw = noise.std_yaw;
  out.sigmas.direct_depth = depth_sd;
  return out;
}

/// Per-source RMSE measured on a calibration batch.
using CalibrationTable = std::array<double, kNumDepths>;

/// Runs `noise.calibration_objects` fresh objects (each with
/// `noise.calibration_replicates` noise draws) through the noisy solver and
/// records each source's root-mean-square depth error. Sources that were never
/// valid get NaN.
inline CalibrationTable calibrate_sigmas(const SceneConfig& cfg, const NoiseModel& noise) {
  SceneConfig cal = cfg;
  cal.n_objects = std::max<std::size_t>(noise.calibration_objects, 1000);
  cal.seed = derive_seed(cfg.seed, SeedStream::Calibration);
  const Scene scene = generate_scene(cal);

  std::array<double, kNumDepths> sum_sq{};
  std::array<std::size_t, kNumDepths> count{};
  const std::size_t reps = noise.calibration_replicates;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const double z = scene[i].truth.center.z();
    for (std::size_t r = 0; r < reps; ++r) {
      const auto obs = perturb(scene[i].observation, noise,
                               derive_seed(cal.seed, SeedStream::CalibrationNoise, i * reps + r));
      const auto est = solve_all(obs, cfg.intrinsics);
      for (std::size_t s = 0; s < kNumDepths; ++s) {
        if (!est[s].valid) continue;
        sum_sq[s] += (est[s].value - z) * (est[s].value - z);
        ++count[s];
      }
    }
  }
  CalibrationTable table;
  for (std::size_t s = 0; s < kNumDepths; ++s)
    table[s] = count[s] ? std::sqrt(sum_sq[s] / static_cast<double>(count[s]))
                        : std::numeric_limits<double>::quiet_NaN();
  return table;
}

/// Floor on any reported sigma; keeps noiseless runs inside the fusion domain.
inline constexpr double kMinReportedSigma = 1e-6;
/// Central-difference step, in each input's natural unit.
inline constexpr double kSigmaFdStep = 1e-4;

namespace detail {

/// Delta-method spread of each of the 20 depths; NaN where a difference
/// straddles a degeneracy.
inline std::array<double, kNumDepths> propagated_sigmas(const ObjectObservation& obs,
                                                        const CameraIntrinsics& k) {
  std::array<double, kNumDepths> var{};
  std::array<bool, kNumDepths> broken{};
  ObjectObservation probe = obs;
  probe.estimate_sigmas.reset();

  const auto accumulate = [&](double& quantity, double sd) {
    if (!(sd > 0.0)) return;
    const double original = quantity;
    quantity = original + kSigmaFdStep;
    const auto plus = solve_all(probe, k);
    quantity = original - kSigmaFdStep;
    const auto minus = solve_all(probe, k);
    quantity = original;
    for (std::size_t s = 1; s < kNumDepths; ++s) {  // source 0 handled exactly below
      if (plus[s].valid != minus[s].valid) {
        broken[s] = true;
        continue;
      }
      if (!plus[s].valid) continue;
      const double dz = (plus[s].value - minus[s].value) / (2.0 * kSigmaFdStep);
      var[s] += dz * dz * sd * sd;
    }
  };

  const auto& sg = obs.sigmas;
  accumulate(probe.center_px.u, sg.center);
  accumulate(probe.center_px.v, sg.center);
  for (auto& p : probe.keypoints.vertices) {
    accumulate(p.u, sg.keypoint);
    accumulate(p.v, sg.keypoint);
  }
  for (double& h : probe.heights.corner) accumulate(h, sg.height);
  accumulate(probe.heights.center, sg.height);
  accumulate(probe.dims.h, sg.dims.h);
  accumulate(probe.dims.w, sg.dims.w);
  accumulate(probe.dims.l, sg.dims.l);
  accumulate(probe.yaw, sg.yaw);

  std::array<double, kNumDepths> out;
  out[0] = sg.direct_depth;  // identity map
  for (std::size_t s = 1; s < kNumDepths; ++s)
    out[s] = broken[s] ? std::numeric_limits<double>::quiet_NaN() : std::sqrt(var[s]);
  return out;
}

}  // namespace detail

/// Attaches a reported sigma to each valid estimate.
///
/// Base sigma comes from the observation's own per-estimate sigmas when
/// present, else from the noise model's policy. The reported value is
/// factor * sqrt(base^2 + inflation^2), floored at kMinReportedSigma. Invalid
/// estimates keep valid = false and sigma = 0; an estimate whose base sigma is
/// undefined becomes invalid.
inline DepthEstimates assign_sigmas(const ObjectObservation& obs, const DepthEstimates& estimates,
                                    const NoiseModel& noise, const CameraIntrinsics& k,
                                    const CalibrationTable* calibration = nullptr) {
  std::array<double, kNumDepths> base;
  if (obs.estimate_sigmas) {
    base = *obs.estimate_sigmas;
  } else {
    switch (noise.sigma_mode) {
      case SigmaMode::Propagated:
        base = detail::propagated_sigmas(obs, k);
        break;
      case SigmaMode::Calibrated:
        if (!calibration) throw ConfigError("assign_sigmas: calibrated mode needs a calibration table");
        base = *calibration;
        break;
      case SigmaMode::Fixed:
        base.fill(noise.fixed_sigma);
        break;
    }
  }

  DepthEstimates out = estimates;
  for (std::size_t s = 0; s < kNumDepths; ++s) {
    auto& e = out[s];
    if (!e.valid) {
      e.sigma = 0.0;
      continue;
    }
    const double reported = noise.miscalibration_factor * std::hypot(base[s], obs.sigma_inflation[s]);
    if (!std::isfinite(reported)) {
      e.valid = false;
      e.sigma = 0.0;
      continue;
    }
    e.sigma = std::max(reported, kMinReportedSigma);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assumption collapse

enum class CollapseTarget { DirectDepth, PhysicalHeight, PixelHeights, Keypoints, Yaw, Center };

inline CollapseTarget parse_collapse_target(std::string_view tag) {
  if (tag == "direct_depth" || tag == "E") return CollapseTarget::DirectDepth;
  if (tag == "physical_height") return CollapseTarget::PhysicalHeight;
  if (tag == "pixel_heights" || tag == "H") return CollapseTarget::PixelHeights;
  if (tag == "keypoints" || tag == "K") return CollapseTarget::Keypoints;
  if (tag == "yaw") return CollapseTarget::Yaw;
  if (tag == "center") return CollapseTarget::Center;
  throw ConfigError("collapse: unknown target tag '" + std::string(tag) + "'");
}

inline std::string to_string(CollapseTarget t) {
  switch (t) {
    case CollapseTarget::DirectDepth: return "direct_depth";
    case CollapseTarget::PhysicalHeight: return "physical_height";
    case CollapseTarget::PixelHeights: return "pixel_heights";
    case CollapseTarget::Keypoints: return "keypoints";
    case CollapseTarget::Yaw: return "yaw";
    case CollapseTarget::Center: return "center";
  }
  return "?";
}

enum class CorruptionKind { Multiply, Add };

struct CollapseSpec {
  CollapseTarget target = CollapseTarget::DirectDepth;
  CorruptionKind kind = CorruptionKind::Multiply;
  double magnitude = 5.0;
  double fraction = 0.0;
  bool honest_sigma = true;
  /// Dishonest variant: moved estimates claim half the smallest sigma of the
  /// object's untouched estimates. See apply_overconfidence.
  bool overconfident = false;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw ConfigError("collapse: fraction must lie in [0, 1]");
    if (!std::isfinite(magnitude)) throw ConfigError("collapse: magnitude must be finite");
    if (overconfident && honest_sigma) throw ConfigError("collapse: overconfident requires honest_sigma = false");
  }
};

using MovedSources = std::bitset<kNumDepths>;

struct CollapsedScene {
  std::vector<ObjectObservation> observations;
  std::vector<bool> affected;
  std::vector<MovedSources> moved;  // estimates whose value or validity the corruption changed
};

namespace detail {
inline void corrupt(double& x, const CollapseSpec& spec) {
  x = spec.kind == CorruptionKind::Multiply ? x * spec.magnitude : x + spec.magnitude;
}

inline void corrupt_target(ObjectObservation& obs, const CollapseSpec& spec) {
  switch (spec.target) {
    case CollapseTarget::DirectDepth: corrupt(obs.direct_depth, spec); break;
    case CollapseTarget::PhysicalHeight: corrupt(obs.dims.h, spec); break;
    case CollapseTarget::PixelHeights:
      for (double& h : obs.heights.corner) corrupt(h, spec);
      corrupt(obs.heights.center, spec);
      break;
    case CollapseTarget::Keypoints:
      for (auto& p : obs.keypoints.vertices) {
        corrupt(p.u, spec);
        corrupt(p.v, spec);
      }
      break;
    case CollapseTarget::Yaw: corrupt(obs.yaw, spec); break;
    case CollapseTarget::Center:
      corrupt(obs.center_px.u, spec);
      corrupt(obs.center_px.v, spec);
      obs.keypoints.center = obs.center_px;
      break;
  }
}
}  // namespace detail

/// Corrupts the targeted quantity on round(fraction * n) objects chosen by a
/// seeded shuffle. With an honest spec, every estimate the corruption moves
/// gets its spread inflated by the size of the move, so its reported sigma
/// matches the RMS error a calibration pass over the corrupted object would see.
inline CollapsedScene inject_collapse(const std::vector<ObjectObservation>& scene,
                                      const CollapseSpec& spec, const CameraIntrinsics& k,
                                      std::uint64_t seed) {
  spec.validate();
  CollapsedScene out{scene, std::vector<bool>(scene.size(), false),
                     std::vector<MovedSources>(scene.size())};
  const auto n_affected =
      static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(scene.size())));
  if (n_affected == 0) return out;

  std::vector<std::size_t> order(scene.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  for (std::size_t j = 0; j < n_affected; ++j) {
    const std::size_t i = order[j];
    out.affected[i] = true;
    ObjectObservation& obs = out.observations[i];
    const auto before = solve_all(obs, k);
    detail::corrupt_target(obs, spec);
    const auto after = solve_all(obs, k);
    for (std::size_t s = 0; s < kNumDepths; ++s) {
      if (before[s].valid != after[s].valid ||
          (after[s].valid && after[s].value != before[s].value))
        out.moved[i].set(s);
      if (spec.honest_sigma && before[s].valid && after[s].valid)
        obs.sigma_inflation[s] =
            std::hypot(obs.sigma_inflation[s], after[s].value - before[s].value);
    }
  }
  return out;
}

/// Moved estimates report half the smallest sigma among the object's other
/// valid estimates, so the robust selection seeds on a corrupted value.
inline void apply_overconfidence(DepthEstimates& estimates, const MovedSources& moved) {
  double floor = std::numeric_limits<double>::infinity();
  for (const auto& e : estimates)
    if (e.valid && !moved.test(e.source.index())) floor = std::min(floor, e.sigma);
  if (!std::isfinite(floor)) return;
  for (auto& e : estimates)
    if (e.valid && moved.test(e.source.index())) e.sigma = std::max(0.5 * floor, kMinReportedSigma);
}

}  // namespace ddepth
