#pragma once

// Shared fixture loading for the unit and acceptance tests.

#include <string>
#include <vector>

#include "ddepth/config_io.hpp"
#include "ddepth/pipeline.hpp"

namespace ddepth::testing {

inline std::string fixture(const std::string& name) { return std::string(DDEPTH_FIXTURES) + "/" + name; }

struct FixtureRun {
  SceneConfig scene_cfg;
  NoiseModel noise;
  Scene scene;
  std::vector<ObjectObservation> observations;
  std::vector<EvalObject> clean;
  std::optional<CollapseSpec> spec;
  CollapsedScene collapsed;
  std::vector<EvalObject> corrupted;
};

/// Runs a shipped config the same way the CLI does.
inline FixtureRun run_fixture(const std::string& name) {
  const json raw = load_json_file(fixture(name));
  FixtureRun r;
  r.scene_cfg = scene_config_from_json(raw.value("scene", json::object()));
  r.noise = noise_from_json(raw.value("noise", json::object()));
  r.scene = generate_scene(r.scene_cfg);
  r.observations = observe_scene(r.scene, r.noise, r.scene_cfg.seed);
  const auto cal = maybe_calibrate(r.scene_cfg, r.noise);
  const CalibrationTable* table = cal ? &*cal : nullptr;
  const CameraIntrinsics& k = r.scene_cfg.intrinsics;
  r.clean = estimate_scene(r.scene, r.observations, {}, r.noise, k, table);
  if (raw.contains("collapse")) {
    r.spec = collapse_from_json(raw.at("collapse"));
    r.collapsed = inject_collapse(r.observations, *r.spec, k, derive_seed(r.scene_cfg.seed, SeedStream::Collapse));
    r.corrupted = estimate_collapsed(r.scene, r.collapsed, *r.spec, r.noise, k, table);
  }
  return r;
}

}  // namespace ddepth::testing
