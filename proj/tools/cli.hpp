#pragma once

// Command-line driver. Subcommands:
//   simulate | ablate | collapse | kitti-roundtrip | losses-check
// Common flags: --config FILE  --out FILE  --seed N  --format csv|json
// Without --out, reports go to $DDEPTH_OUTPUT_DIR/<command>.<ext> (or the
// working directory when the variable is unset).
// Exit codes: 0 success, 1 config/parse/IO failure, 2 bad usage.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddepth/config_io.hpp"
#include "ddepth/confidence.hpp"
#include "ddepth/evaluate.hpp"
#include "ddepth/kitti.hpp"
#include "ddepth/pipeline.hpp"
#include "ddepth/report.hpp"
#include "ddepth/simulate.hpp"

namespace ddepth::cli {

namespace fs = std::filesystem;

inline constexpr const char* kOutputDirEnv = "DDEPTH_OUTPUT_DIR";

struct RunConfig {
  std::string command;
  std::string config_path;
  std::string output_path;
  std::optional<std::uint64_t> seed;
  ReportFormat format = ReportFormat::Csv;
  std::string export_scene;
};

struct Outcome {
  Table table;
  json config;
  std::string summary;
};

namespace detail {

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

/// Parsed config plus everything derived from it.
struct Experiment {
  json raw;
  fs::path base_dir;
  SceneConfig scene_cfg;
  std::string scene_file;
  NoiseModel noise;
  std::uint64_t seed = 0;
};

inline Experiment load_experiment(const RunConfig& rc,
                                  std::initializer_list<std::string_view> extra_keys) {
  Experiment ex;
  ex.raw = rc.config_path.empty() ? json::object() : load_json_file(rc.config_path);
  ex.base_dir = rc.config_path.empty() ? fs::current_path() : fs::path(rc.config_path).parent_path();
  if (!ex.raw.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [key, _] : ex.raw.items()) {
    bool ok = key == "scene" || key == "noise" || key == "description";
    for (auto k : extra_keys) ok = ok || key == k;
    if (!ok) throw ConfigError("config: unknown key '" + key + "' for command " + rc.command);
  }
  ex.scene_cfg = scene_config_from_json(ex.raw.value("scene", json::object()), &ex.scene_file);
  ex.noise = noise_from_json(ex.raw.value("noise", json::object()));
  if (!ex.scene_file.empty()) ex.scene_file = resolve(ex.base_dir, ex.scene_file).string();
  ex.seed = rc.seed.value_or(ex.scene_cfg.seed);
  ex.scene_cfg.seed = ex.seed;
  return ex;
}

inline Scene load_scene(Experiment& ex) {
  if (ex.scene_file.empty()) return generate_scene(ex.scene_cfg);
  SceneConfig stored;
  Scene scene = scene_from_json(load_json_file(ex.scene_file), &stored);
  stored.seed = ex.seed;
  stored.n_objects = scene.size();
  ex.scene_cfg = stored;
  return scene;
}

inline json base_config(const RunConfig& rc, const Experiment& ex) {
  json c;
  c["command"] = rc.command;
  c["seed"] = ex.seed;
  c["scene"] = scene_config_json(ex.scene_cfg);
  if (!ex.scene_file.empty()) c["scene"]["scene_file"] = fs::path(ex.scene_file).filename().string();
  c["noise"] = noise_json(ex.noise);
  c["derived_seeds"] = {{"noise_stream", derive_seed(ex.seed, SeedStream::Noise)},
                        {"calibration_batch", derive_seed(ex.seed, SeedStream::Calibration)},
                        {"collapse", derive_seed(ex.seed, SeedStream::Collapse)}};
  return c;
}

inline std::vector<StrategySubset> read_subsets(const json& raw, std::vector<StrategySubset> fallback) {
  if (!raw.contains("subsets")) return fallback;
  std::vector<StrategySubset> out;
  for (const auto& s : raw.at("subsets")) {
    if (!s.is_string()) throw ConfigError("subsets: expected strings like \"EHK\"");
    out.push_back(StrategySubset::parse(s.get<std::string>()));
  }
  return out;
}

inline std::vector<FusionMode> read_modes(const json& raw) {
  if (!raw.contains("fusion_modes")) return all_fusion_modes();
  std::vector<FusionMode> out;
  for (const auto& s : raw.at("fusion_modes")) {
    if (!s.is_string()) throw ConfigError("fusion_modes: expected strings");
    out.push_back(parse_fusion_mode(s.get<std::string>()));
  }
  return out;
}

inline json names(const std::vector<StrategySubset>& subsets) {
  json a = json::array();
  for (const auto& s : subsets) a.push_back(s.name());
  return a;
}

inline json names(const std::vector<FusionMode>& modes) {
  json a = json::array();
  for (auto m : modes) a.push_back(to_string(m));
  return a;
}

inline std::string fmt(double x) { return format_double(x); }

/// Headline MAE: the iterative all-strategy row when present, else the first row.
inline double headline_mae(const EvalReport& r) {
  for (const auto& row : r.rows)
    if (row.mode == FusionMode::Iterative && row.subset == "EHK") return row.mae_combined;
  return r.rows.empty() ? std::nan("") : r.rows.front().mae_combined;
}

struct EstimatedScene {
  Scene scene;
  std::vector<ObjectObservation> observations;
  std::optional<CalibrationTable> calibration;
  std::vector<EvalObject> objects;
};

inline EstimatedScene estimate(Experiment& ex) {
  EstimatedScene s;
  s.scene = load_scene(ex);
  s.observations = observe_scene(s.scene, ex.noise, ex.seed);
  s.calibration = maybe_calibrate(ex.scene_cfg, ex.noise);
  s.objects = estimate_scene(s.scene, s.observations, {}, ex.noise, ex.scene_cfg.intrinsics,
                             s.calibration ? &*s.calibration : nullptr);
  return s;
}

// ---------------------------------------------------------------------------

inline Outcome cmd_simulate(const RunConfig& rc) {
  Experiment ex = load_experiment(rc, {});
  const EstimatedScene es = estimate(ex);

  Table t;
  t.columns = {"index", "z_true", "x", "y", "h", "w", "l", "yaw", "z_combined", "abs_error",
               "n_valid", "n_selected", "iterations"};
  for (std::size_t s = 0; s < kNumDepths; ++s) t.columns.push_back("z_" + DepthSource(s).name());
  for (std::size_t s = 0; s < kNumDepths; ++s) t.columns.push_back("sigma_" + DepthSource(s).name());

  const auto all = StrategySubset::parse("EHK");
  double err = 0.0;
  std::size_t scored = 0;
  for (std::size_t i = 0; i < es.objects.size(); ++i) {
    const auto& o = es.objects[i];
    const auto& b = es.scene[i].truth;
    const auto c = combine(o.estimates, all, FusionMode::Iterative, o.z_true);
    const double nan = std::nan("");
    const double zc = c ? c->depth : nan;
    std::vector<Cell> row = {static_cast<std::int64_t>(i), b.center.z(), b.center.x(), b.center.y(),
                             b.dims.h, b.dims.w, b.dims.l, b.yaw, zc, std::abs(zc - o.z_true),
                             static_cast<std::int64_t>(c ? c->n_valid : 0),
                             static_cast<std::int64_t>(c ? c->used.count() : 0),
                             static_cast<std::int64_t>(c ? c->iterations : 0)};
    for (const auto& e : o.estimates) row.emplace_back(e.valid ? e.value : nan);
    for (const auto& e : o.estimates) row.emplace_back(e.valid ? e.sigma : nan);
    t.add(std::move(row));
    if (c) {
      err += std::abs(zc - o.z_true);
      ++scored;
    }
  }
  if (!rc.export_scene.empty()) {
    std::ofstream out(rc.export_scene, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + rc.export_scene + "' for writing");
    out << scene_json(es.scene, ex.scene_cfg).dump(2) << '\n';
  }
  const double m = scored ? err / static_cast<double>(scored) : std::nan("");
  return {std::move(t), base_config(rc, ex),
          "simulate: rows=" + std::to_string(es.objects.size()) + " mae_iterative=" + fmt(m)};
}

inline Outcome cmd_ablate(const RunConfig& rc) {
  Experiment ex = load_experiment(rc, {"subsets", "fusion_modes"});
  const auto subsets = read_subsets(ex.raw, StrategySubset::all());
  const auto modes = read_modes(ex.raw);
  const EstimatedScene es = estimate(ex);
  const EvalReport report = run_ablation(es.objects, subsets, modes);

  json cfg = base_config(rc, ex);
  cfg["subsets"] = names(subsets);
  cfg["fusion_modes"] = names(modes);
  return {to_table(report), cfg,
          "ablate: rows=" + std::to_string(report.rows.size()) + " mae_headline=" +
              fmt(headline_mae(report))};
}

inline Outcome cmd_collapse(const RunConfig& rc) {
  Experiment ex = load_experiment(rc, {"subsets", "fusion_modes", "collapse"});
  if (!ex.raw.contains("collapse")) throw ConfigError("collapse: config needs a \"collapse\" section");
  const CollapseSpec spec = collapse_from_json(ex.raw.at("collapse"));
  const auto subsets = read_subsets(ex.raw, {StrategySubset::parse("EHK")});
  const auto modes = read_modes(ex.raw);

  const EstimatedScene es = estimate(ex);
  const CameraIntrinsics& k = ex.scene_cfg.intrinsics;
  const CollapsedScene cs =
      inject_collapse(es.observations, spec, k, derive_seed(ex.seed, SeedStream::Collapse));
  const auto corrupted = estimate_collapsed(es.scene, cs, spec, ex.noise, k,
                                            es.calibration ? &*es.calibration : nullptr);

  const EvalReport clean_rep = run_ablation(es.objects, subsets, modes);
  const EvalReport bad_rep = run_ablation(corrupted, subsets, modes, es.objects);

  Table t;
  t.columns = {"scenario"};
  for (const auto& c : eval_report_columns()) t.columns.push_back(c);
  for (const char* c : {"n_affected", "rejection_accuracy", "false_rejection_rate",
                        "recovery_threshold_q95", "mae_affected_clean", "mae_affected_corrupted"})
    t.columns.emplace_back(c);

  const Table clean_t = to_table(clean_rep);
  const Table bad_t = to_table(bad_rep);
  std::optional<RecoveryStats> headline;
  std::size_t r = 0;
  for (const auto& subset : subsets) {
    for (FusionMode mode : modes) {
      const RecoveryStats st = collapse_recovery(es.objects, corrupted, subset, mode);
      if (subset.name() == "EHK" && mode == FusionMode::Iterative) headline = st;
      const double nan = std::nan("");
      std::vector<Cell> clean_row = {std::string("clean")};
      clean_row.insert(clean_row.end(), clean_t.rows[r].begin(), clean_t.rows[r].end());
      for (int i = 0; i < 6; ++i) clean_row.emplace_back(i == 0 ? Cell(std::int64_t{0}) : Cell(nan));
      t.add(std::move(clean_row));

      std::vector<Cell> bad_row = {std::string("corrupted")};
      bad_row.insert(bad_row.end(), bad_t.rows[r].begin(), bad_t.rows[r].end());
      bad_row.insert(bad_row.end(), {static_cast<std::int64_t>(st.n_affected), st.rejection_accuracy,
                                     st.false_rejection_rate, st.threshold, st.mae_affected_clean,
                                     st.mae_affected_corrupted});
      t.add(std::move(bad_row));
      ++r;
    }
  }

  json cfg = base_config(rc, ex);
  cfg["collapse"] = collapse_json(spec);
  cfg["subsets"] = names(subsets);
  cfg["fusion_modes"] = names(modes);
  std::string summary = "collapse: rows=" + std::to_string(t.rows.size()) +
                        " mae_headline=" + fmt(headline_mae(bad_rep));
  if (headline)
    summary += " affected=" + std::to_string(headline->n_affected) +
               " rejection_accuracy=" + fmt(headline->rejection_accuracy) +
               " recovery_rate=" + fmt(headline->recovery_rate);
  return {std::move(t), cfg, summary};
}

inline Outcome cmd_kitti(const RunConfig& rc) {
  if (rc.config_path.empty()) throw ConfigError("kitti-roundtrip: --config is required");
  const json raw = load_json_file(rc.config_path);
  const fs::path base = fs::path(rc.config_path).parent_path();
  if (!raw.is_object() || !raw.contains("kitti")) throw ConfigError("kitti-roundtrip: config needs a \"kitti\" section");
  for (const auto& [key, _] : raw.items())
    if (key != "kitti" && key != "description") throw ConfigError("config: unknown key '" + key + "'");
  const json& kj = raw.at("kitti");
  ddepth::detail::reject_unknown_keys(kj, "kitti", {"calib_file", "label_files", "calib_dir", "label_dir"});

  // (label file, calib file) pairs
  std::vector<std::pair<fs::path, fs::path>> jobs;
  if (kj.contains("label_dir")) {
    if (!kj.contains("calib_dir")) throw ConfigError("kitti: label_dir needs calib_dir");
    const fs::path ld = resolve(base, kj.at("label_dir").get<std::string>());
    const fs::path cd = resolve(base, kj.at("calib_dir").get<std::string>());
    if (!fs::is_directory(ld)) throw ConfigError("kitti: no directory '" + ld.string() + "'");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(ld))
      if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) jobs.emplace_back(f, cd / f.filename());
  } else {
    if (!kj.contains("calib_file") || !kj.contains("label_files"))
      throw ConfigError("kitti: needs calib_file + label_files or label_dir + calib_dir");
    const fs::path calib = resolve(base, kj.at("calib_file").get<std::string>());
    for (const auto& f : kj.at("label_files")) jobs.emplace_back(resolve(base, f.get<std::string>()), calib);
  }

  Table t;
  t.columns = {"file", "line", "type", "z_true", "z_combined", "abs_error", "rel_error", "n_valid",
               "max_source_rel_error"};
  std::size_t non_loc = 0, unproj = 0;
  double worst = 0.0;
  for (const auto& [label_path, calib_path] : jobs) {
    const LabelFile lf = parse_label_file(read_text(label_path));
    if (!lf.errors.empty())
      throw ConfigError(label_path.string() + ": " + lf.errors.front().what());
    KittiCalib calib;
    try {
      calib = parse_calib(read_text(calib_path));
    } catch (const ParseError& e) {
      throw ConfigError(calib_path.string() + ": " + e.what());
    }
    std::vector<KittiLabel> labels;
    for (const auto& e : lf.labels) labels.push_back(e.label);
    const RoundtripReport rep = roundtrip_eval(labels, calib);
    non_loc += rep.skipped_non_localizable;
    unproj += rep.skipped_unprojectable;
    for (const auto& o : rep.objects) {
      double max_src = 0.0;
      for (double e : o.source_error)
        if (!std::isnan(e)) max_src = std::max(max_src, e / o.z_true);
      const double rel = o.abs_error / o.z_true;
      worst = std::max(worst, rel);
      t.add({label_path.filename().string(), static_cast<std::int64_t>(lf.labels[o.label_index].line),
             o.type, o.z_true, o.z_combined, o.abs_error, rel, static_cast<std::int64_t>(o.n_valid),
             max_src});
    }
  }
  json cfg = {{"command", rc.command}, {"kitti", kj},
              {"skipped_non_localizable", non_loc}, {"skipped_unprojectable", unproj}};
  std::string summary = "kitti-roundtrip: rows=" + std::to_string(t.rows.size()) + " skipped=" +
                        std::to_string(non_loc + unproj) + " max_rel_error=" + fmt(worst);
  return {std::move(t), cfg, summary};
}

/// Grid argmin of f over a log-spaced sigma grid.
template <typename F>
double argmin_log_grid(F&& f, double lo, double hi, double ratio) {
  double best_x = lo, best = f(lo);
  for (double x = lo; x <= hi; x *= ratio) {
    const double v = f(x);
    if (v < best) {
      best = v;
      best_x = x;
    }
  }
  return best_x;
}

inline Outcome cmd_losses(const RunConfig& rc) {
  Experiment ex = load_experiment(rc, {"losses"});
  const json lj = ex.raw.value("losses", json::object());
  ddepth::detail::reject_unknown_keys(lj, "losses", {"n_pairs", "grid_ratio"});
  const std::size_t n = lj.value("n_pairs", std::size_t{1000});
  const double ratio = lj.value("grid_ratio", 1.0005);
  constexpr double kTol = 1e-3;

  Table t;
  t.columns = {"check", "variant", "n", "value", "tolerance", "pass"};
  std::mt19937_64 rng(derive_seed(ex.seed, SeedStream::Losses));
  std::uniform_real_distribution<double> log_err(std::log(0.05), std::log(20.0));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // Depth loss: minimizer at sigma = |p - p*|.
  double worst16 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::exp(log_err(rng));
    const double p_star = 10.0 * unit(rng);
    const double p = p_star + (unit(rng) < 0 ? -e : e);
    const double s = argmin_log_grid([&](double sg) { return uncertainty_loss(p, p_star, sg); },
                                     1e-3, 1e3, ratio);
    worst16 = std::max(worst16, std::abs(s - e) / e);
  }
  t.add({std::string("depth_loss_minimizer"), std::string("scalar"), static_cast<std::int64_t>(n),
         worst16, kTol, std::string(worst16 <= kTol ? "pass" : "fail")});

  // Box loss under both vertex norms.
  for (VertexNorm norm : {VertexNorm::L1, VertexNorm::L2}) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::array<Vec3, 8> gt, est;
      const double scale = std::exp(log_err(rng)) / 8.0;
      double total = 0.0;
      for (std::size_t v = 0; v < 8; ++v) {
        gt[v] = Vec3(unit(rng), unit(rng), 10.0 + unit(rng));
        est[v] = gt[v] + scale * Vec3(unit(rng), unit(rng), unit(rng));
        total += vertex_distance(est[v], gt[v], norm);
      }
      const double s = argmin_log_grid(
          [&](double sg) { return box_uncertainty_loss(est, gt, sg, norm); }, 1e-4, 1e3, ratio);
      worst = std::max(worst, std::abs(s - total) / total);
    }
    t.add({std::string("box_loss_minimizer"), std::string(norm == VertexNorm::L1 ? "l1" : "l2"),
           static_cast<std::int64_t>(n), worst, kTol, std::string(worst <= kTol ? "pass" : "fail")});
  }

  // Confidence outputs stay inside [0, 1].
  {
    std::uniform_real_distribution<double> log_var(std::log(1e-4), std::log(1e2));
    std::uniform_real_distribution<double> prob(0.0, 1.0);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = geometry_confidence(std::exp(log_var(rng)), std::exp(log_var(rng)), prob(rng));
      for (double v : {c.d_c, c.d_b, c.p_3d_given_2d, c.p_2d, c.p_m})
        if (!(v >= 0.0 && v <= 1.0)) ++bad;
      if (c.p_m > std::min(c.p_3d_given_2d, c.p_2d)) ++bad;
    }
    t.add({std::string("confidence_bounds"), std::string("random"), static_cast<std::int64_t>(n),
           static_cast<double>(bad), 0.0, std::string(bad == 0 ? "pass" : "fail")});
  }
  {
    const double p = conditional_3d_confidence(0.1, 10.0);
    const double expected = (10.0 / 10.1) * 0.9;
    t.add({std::string("confidence_example"), std::string("var_c=0.1,var_b=10"), std::int64_t{1}, p,
           1e-4, std::string(std::abs(p - expected) <= 1e-4 ? "pass" : "fail")});
  }

  // Supplied combined-depth variance vs the fused set variance.
  const EstimatedScene es = estimate(ex);
  SceneConfig cal_cfg = ex.scene_cfg;
  cal_cfg.seed = derive_seed(ex.seed, SeedStream::Calibration, 1);
  cal_cfg.n_objects = std::max<std::size_t>(ex.noise.calibration_objects, 1000);
  Experiment cal_ex = ex;
  cal_ex.scene_file.clear();
  cal_ex.scene_cfg = cal_cfg;
  cal_ex.seed = cal_cfg.seed;
  const EstimatedScene cal = estimate(cal_ex);
  const auto cal_samples = confidence_samples(cal.scene, cal.observations, cal.objects, cal_cfg.intrinsics);
  const ConfidenceReference ref = confidence_reference(cal_samples);
  const auto samples = confidence_samples(es.scene, es.observations, es.objects, ex.scene_cfg.intrinsics);
  for (auto src : {CombinedVarianceSource::Supplied, CombinedVarianceSource::FusedSet}) {
    const ConfidenceStudy st = confidence_study(samples, src, ref);
    const std::string name = src == CombinedVarianceSource::Supplied ? "supplied" : "fused_set";
    t.add({std::string("confidence_mean_p3d"), name, static_cast<std::int64_t>(st.n), st.mean_p3d,
           std::nan(""), std::string("n/a")});
    t.add({std::string("confidence_error_correlation"), name, static_cast<std::int64_t>(st.n),
           st.correlation_with_error, std::nan(""), std::string("n/a")});
  }

  json cfg = base_config(rc, ex);
  cfg["losses"] = {{"n_pairs", n}, {"grid_ratio", ratio}};
  std::size_t failed = 0;
  for (const auto& row : t.rows)
    if (std::get<std::string>(row.back()) == "fail") ++failed;
  std::string summary =
      "losses-check: rows=" + std::to_string(t.rows.size()) + " failed=" + std::to_string(failed);
  return {std::move(t), cfg, summary};
}

inline std::string default_output(const std::string& command, ReportFormat f) {
  const std::string name = command + (f == ReportFormat::Csv ? ".csv" : ".json");
  if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) return (fs::path(dir) / name).string();
  return name;
}

}  // namespace detail

inline Outcome execute(const RunConfig& rc) {
  if (rc.command == "simulate") return detail::cmd_simulate(rc);
  if (rc.command == "ablate") return detail::cmd_ablate(rc);
  if (rc.command == "collapse") return detail::cmd_collapse(rc);
  if (rc.command == "kitti-roundtrip") return detail::cmd_kitti(rc);
  if (rc.command == "losses-check") return detail::cmd_losses(rc);
  throw ConfigError("unknown command '" + rc.command + "'");
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Diverse monocular depth: solver, robust fusion and experiment harness", "ddepth"};
  app.require_subcommand(1);
  RunConfig rc;
  std::string format = "csv";
  std::uint64_t seed = 0;

  const std::map<std::string, std::string> commands = {
      {"simulate", "Generate a synthetic scene and report per-object depths"},
      {"ablate", "Strategy-subset x fusion-mode ablation"},
      {"collapse", "Assumption-collapse robustness experiment"},
      {"kitti-roundtrip", "Noiseless round trip of KITTI annotations"},
      {"losses-check", "Loss minimizer and confidence sanity checks"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", rc.config_path, "JSON experiment config");
    sub->add_option("--out", rc.output_path, "Report path");
    sub->add_option("--seed", seed, "Override the master seed");
    sub->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json"}));
    if (name == "simulate") sub->add_option("--export-scene", rc.export_scene, "Write the scene as a JSON fixture");
    sub->callback([&rc, name] { rc.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }
  for (CLI::App* sub : app.get_subcommands())
    if (sub->count("--seed")) rc.seed = seed;
  rc.format = format == "json" ? ReportFormat::Json : ReportFormat::Csv;
  if (rc.output_path.empty()) rc.output_path = detail::default_output(rc.command, rc.format);

  try {
    if (!rc.config_path.empty() && !fs::is_regular_file(rc.config_path))
      throw ConfigError("config file '" + rc.config_path + "' does not exist");
    const fs::path out_dir = fs::path(rc.output_path).parent_path();
    if (!out_dir.empty() && !fs::is_directory(out_dir))
      throw ConfigError("output directory '" + out_dir.string() + "' does not exist");

    const Outcome o = execute(rc);
    write_table(o.table, o.config, rc.output_path, rc.format);
    out << o.summary << "\n";
    return 0;
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    err << "error: ";
    if (!rc.config_path.empty() && msg.find(rc.config_path) == std::string::npos)
      err << rc.config_path << ": ";
    err << msg << "\n";
    return 1;
  }
}

}  // namespace ddepth::cli
