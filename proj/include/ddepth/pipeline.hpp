#pragma once

// Scene -> noisy observations -> 20 depths with sigmas, ready for evaluation.

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "ddepth/confidence.hpp"
#include "ddepth/evaluate.hpp"
#include "ddepth/simulate.hpp"

namespace ddepth {

struct PipelineInputs {
  SceneConfig scene;
  NoiseModel noise;
};

/// Noisy observation of every scene object; object i uses noise sub-seed i.
inline std::vector<ObjectObservation> observe_scene(const Scene& scene, const NoiseModel& noise,
                                                    std::uint64_t master_seed) {
  std::vector<ObjectObservation> out;
  out.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i)
    out.push_back(perturb(scene[i].observation, noise, derive_seed(master_seed, SeedStream::Noise, i)));
  return out;
}

/// Solves and attaches sigmas for each observation.
inline std::vector<EvalObject> estimate_scene(const Scene& scene,
                                              const std::vector<ObjectObservation>& observations,
                                              const std::vector<bool>& affected,
                                              const NoiseModel& noise, const CameraIntrinsics& k,
                                              const CalibrationTable* calibration) {
  std::vector<EvalObject> out(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const auto raw = solve_all(observations[i], k);
    out[i].z_true = scene[i].truth.center.z();
    out[i].estimates = assign_sigmas(observations[i], raw, noise, k, calibration);
    out[i].affected = i < affected.size() && affected[i];
  }
  return out;
}

/// estimate_scene for a collapsed scene, honouring the collapse's sigma policy.
inline std::vector<EvalObject> estimate_collapsed(const Scene& scene, const CollapsedScene& collapsed,
                                                  const CollapseSpec& spec, const NoiseModel& noise,
                                                  const CameraIntrinsics& k,
                                                  const CalibrationTable* calibration) {
  auto out = estimate_scene(scene, collapsed.observations, collapsed.affected, noise, k, calibration);
  if (spec.overconfident)
    for (std::size_t i = 0; i < out.size(); ++i)
      if (collapsed.affected[i]) apply_overconfidence(out[i].estimates, collapsed.moved[i]);
  return out;
}

/// Calibration table when the noise model asks for one.
inline std::optional<CalibrationTable> maybe_calibrate(const SceneConfig& cfg, const NoiseModel& noise) {
  if (noise.sigma_mode != SigmaMode::Calibrated) return std::nullopt;
  return calibrate_sigmas(cfg, noise);
}

/// Per-object inputs for the geometry-confidence study.
struct ConfidenceSample {
  double z_true = 0.0;
  double z_c = 0.0;        // iterative all-strategy depth
  double var_s = 0.0;      // fused set variance
  double abs_error = 0.0;  // |z_c - z_true|
  double box_error = 0.0;  // summed L1 vertex error of the box placed at z_c
  double p_2d = 1.0;
};

inline std::vector<ConfidenceSample> confidence_samples(const Scene& scene,
                                                        const std::vector<ObjectObservation>& observations,
                                                        const std::vector<EvalObject>& objects,
                                                        const CameraIntrinsics& k) {
  const auto all = StrategySubset::parse("EHK");
  std::vector<ConfidenceSample> out;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const auto c = combine(objects[i].estimates, all, FusionMode::Iterative, objects[i].z_true);
    if (!c) continue;
    const auto& obs = observations[i];
    Box3D est;
    const Vec2 xy = backproject_center(obs.center_px, c->depth, k);
    est.center = Vec3(xy.x(), xy.y(), c->depth);
    est.dims = obs.dims;
    est.yaw = obs.yaw;
    const auto ve = box_vertices_camera_frame(est);
    const auto vt = box_vertices_camera_frame(scene[i].truth);
    ConfidenceSample s;
    s.z_true = objects[i].z_true;
    s.z_c = c->depth;
    s.var_s = c->variance;
    s.abs_error = std::abs(c->depth - s.z_true);
    for (std::size_t v = 0; v < kNumVertices; ++v) s.box_error += vertex_distance(ve[v], vt[v]);
    s.p_2d = obs.heatmap_score;
    out.push_back(s);
  }
  return out;
}

/// Depth-relative error scales measured on a calibration batch.
struct ConfidenceReference {
  double rel_depth_rmse = 0.0;
  double rel_box_error = 0.0;
};

inline ConfidenceReference confidence_reference(std::span<const ConfidenceSample> samples) {
  if (samples.empty()) throw std::invalid_argument("confidence_reference: no samples");
  ConfidenceReference r;
  for (const auto& s : samples) {
    const double rel = (s.z_c - s.z_true) / s.z_true;
    r.rel_depth_rmse += rel * rel;
    r.rel_box_error += s.box_error / s.z_c;
  }
  const double n = static_cast<double>(samples.size());
  r.rel_depth_rmse = std::sqrt(r.rel_depth_rmse / n);
  r.rel_box_error /= n;
  return r;
}

/// Supplied: sigma_c^2 = (relative RMSE * z_c)^2. FusedSet: sigma_c^2 = sigma_s^2.
enum class CombinedVarianceSource { Supplied, FusedSet };

struct ConfidenceStudy {
  std::size_t n = 0;
  double mean_p3d = 0.0;
  double correlation_with_error = 0.0;  // Pearson, p(3D|2D) vs |z_c - z_true|
};

inline ConfidenceStudy confidence_study(std::span<const ConfidenceSample> samples,
                                        CombinedVarianceSource source, const ConfidenceReference& ref) {
  ConfidenceStudy st;
  st.n = samples.size();
  if (samples.empty()) return st;
  std::vector<double> p;
  for (const auto& s : samples) {
    const double sc = source == CombinedVarianceSource::Supplied ? ref.rel_depth_rmse * s.z_c : std::sqrt(s.var_s);
    const double sb = ref.rel_box_error * s.z_c;
    p.push_back(conditional_3d_confidence(std::max(sc * sc, 1e-12), std::max(sb * sb, 1e-12)));
  }
  const double n = static_cast<double>(samples.size());
  double mp = 0.0, me = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    mp += p[i];
    me += samples[i].abs_error;
  }
  mp /= n;
  me /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double dx = p[i] - mp, dy = samples[i].abs_error - me;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  st.mean_p3d = mp;
  st.correlation_with_error = sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : std::nan("");
  return st;
}

}  // namespace ddepth
