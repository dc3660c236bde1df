#pragma once

// Experiment metrics: oracle selection, MAE, strategy ablations and
// collapse recovery.

#include <algorithm>
#include <bitset>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "ddepth/combiner.hpp"
#include "ddepth/depthsolver.hpp"
#include "ddepth/errors.hpp"

namespace ddepth {

/// Non-empty union of the E (direct), H (height) and K (keypoint) families.
class StrategySubset {
 public:
  StrategySubset(bool direct, bool height, bool keypoint)
      : direct_(direct), height_(height), keypoint_(keypoint) {
    if (!direct && !height && !keypoint) throw ConfigError("strategy subset must not be empty");
  }

  /// Parses letters from {E, H, K}, e.g. "EH" or "EHK".
  static StrategySubset parse(std::string_view text) {
    bool e = false, h = false, k = false;
    for (char c : text) {
      bool* flag = c == 'E' ? &e : c == 'H' ? &h : c == 'K' ? &k : nullptr;
      if (!flag || *flag) throw ConfigError("bad strategy subset '" + std::string(text) + "'");
      *flag = true;
    }
    return {e, h, k};
  }

  static std::vector<StrategySubset> all() {
    return {parse("E"), parse("H"), parse("K"), parse("EH"), parse("EK"), parse("HK"), parse("EHK")};
  }

  bool contains(DepthSource s) const {
    switch (s.strategy()) {
      case Strategy::Direct: return direct_;
      case Strategy::Height: return height_;
      case Strategy::Keypoint: return keypoint_;
    }
    return false;
  }

  bool contains(const StrategySubset& other) const {
    return (direct_ || !other.direct_) && (height_ || !other.height_) && (keypoint_ || !other.keypoint_);
  }

  std::string name() const {
    return std::string(direct_ ? "E" : "") + (height_ ? "H" : "") + (keypoint_ ? "K" : "");
  }

  friend bool operator==(const StrategySubset&, const StrategySubset&) = default;

 private:
  bool direct_;
  bool height_;
  bool keypoint_;
};

enum class FusionMode { Hard, Mean, Weighted, Min, Iterative, Oracle };

inline std::vector<FusionMode> all_fusion_modes() {
  return {FusionMode::Hard, FusionMode::Mean, FusionMode::Weighted,
          FusionMode::Min, FusionMode::Iterative, FusionMode::Oracle};
}

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::Hard: return "hard";
    case FusionMode::Mean: return "mean";
    case FusionMode::Weighted: return "weighted";
    case FusionMode::Min: return "min";
    case FusionMode::Iterative: return "iterative";
    case FusionMode::Oracle: return "oracle";
  }
  return "?";
}

inline FusionMode parse_fusion_mode(std::string_view s) {
  for (FusionMode m : all_fusion_modes())
    if (to_string(m) == s) return m;
  throw ConfigError("unknown fusion mode '" + std::string(s) + "'");
}

/// Closest estimate to the truth; ties go to the lowest source index.
inline DepthEstimate oracle_select(std::span<const DepthEstimate> estimates, double z_true) {
  const DepthEstimate* best = nullptr;
  for (const auto& e : estimates) {
    if (!e.valid) continue;
    if (!best) {
      best = &e;
      continue;
    }
    const double de = std::abs(e.value - z_true);
    const double db = std::abs(best->value - z_true);
    if (de < db || (de == db && e.source < best->source)) best = &e;
  }
  if (!best) throw std::invalid_argument("oracle_select: no valid estimate");
  return *best;
}

inline double mae(std::span<const double> values, std::span<const double> truths) {
  if (values.size() != truths.size()) throw std::invalid_argument("mae: length mismatch");
  if (values.empty()) throw std::invalid_argument("mae: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += std::abs(values[i] - truths[i]);
  return total / static_cast<double>(values.size());
}

/// Sample quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

using SourceMask = std::bitset<kNumDepths>;

struct CombinedDepth {
  double depth = 0.0;
  double variance = 0.0;
  std::size_t iterations = 1;
  std::size_t n_valid = 0;
  SourceMask used;  // sources that contribute to `depth`
};

/// Fuses the estimates of `subset` with the given mode; nullopt when the subset
/// has no valid estimate. `z_true` is read only by the Oracle mode.
///
/// Hard: minimum-variance value. Mean: unweighted average. Weighted: inverse-
/// variance fusion of everything. Min: Weighted's depth with the set variance
/// replaced by the smallest member variance (an interpretation of the "Min"
/// ablation). Iterative: robust 3-sigma selection. Oracle: closest to truth.
inline std::optional<CombinedDepth> combine(std::span<const DepthEstimate> estimates,
                                            const StrategySubset& subset, FusionMode mode,
                                            double z_true) {
  std::vector<DepthEstimate> pool;
  for (const auto& e : estimates)
    if (e.valid && subset.contains(e.source)) pool.push_back(e);
  if (pool.empty()) return std::nullopt;
  std::sort(pool.begin(), pool.end(),
            [](const DepthEstimate& a, const DepthEstimate& b) { return a.source < b.source; });

  CombinedDepth out;
  out.n_valid = pool.size();
  std::vector<double> means, vars;
  for (const auto& e : pool) {
    means.push_back(e.value);
    vars.push_back(e.sigma * e.sigma);
  }
  const auto use_all = [&] {
    for (const auto& e : pool) out.used.set(e.source.index());
  };

  switch (mode) {
    case FusionMode::Hard: {
      const auto& e = pool[detail::min_variance_index(pool)];
      out.depth = e.value;
      out.variance = e.sigma * e.sigma;
      out.used.set(e.source.index());
      break;
    }
    case FusionMode::Mean: {
      double sum = 0.0, var = 0.0;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        sum += means[i];
        var += vars[i];
      }
      const double n = static_cast<double>(pool.size());
      out.depth = sum / n;
      out.variance = var / (n * n);
      use_all();
      break;
    }
    case FusionMode::Weighted: {
      const Gaussian g = fuse(means, vars);
      out.depth = g.mean;
      out.variance = g.variance;
      use_all();
      break;
    }
    case FusionMode::Min: {
      out.depth = fuse(means, vars).mean;
      out.variance = *std::min_element(vars.begin(), vars.end());
      use_all();
      break;
    }
    case FusionMode::Iterative: {
      const FusionResult r = select_and_combine(pool);
      out.depth = r.combined_depth;
      out.variance = r.combined_variance;
      out.iterations = r.iterations;
      for (DepthSource s : r.selected) out.used.set(s.index());
      break;
    }
    case FusionMode::Oracle: {
      const DepthEstimate e = oracle_select(pool, z_true);
      out.depth = e.value;
      out.variance = e.sigma * e.sigma;
      out.used.set(e.source.index());
      break;
    }
  }
  return out;
}

/// One object as seen by the evaluation harness.
struct EvalObject {
  double z_true = 0.0;
  DepthEstimates estimates;
  bool affected = false;  // carries an injected collapse
};

inline constexpr double kRecoveryQuantile = 0.95;

struct EvalRow {
  std::string subset;
  FusionMode mode = FusionMode::Iterative;
  std::size_t n_objects = 0;
  std::size_t n_scored = 0;  // objects with >= 1 valid estimate in the subset
  double mae_combined = 0.0;
  double mae_oracle = 0.0;
  double rejection_rate = 0.0;  // share of valid estimates left out of the combined depth
  double mean_iterations = 0.0;
  double mean_combined_variance = 0.0;
  double collapse_recovery_rate = 1.0;
  std::string note;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

namespace detail {
struct ScoredObject {
  double abs_error = 0.0;
  double oracle_error = 0.0;
  CombinedDepth combined;
};

inline std::vector<std::optional<ScoredObject>> score_all(std::span<const EvalObject> objects,
                                                          const StrategySubset& subset,
                                                          FusionMode mode) {
  std::vector<std::optional<ScoredObject>> out;
  out.reserve(objects.size());
  for (const auto& o : objects) {
    auto c = combine(o.estimates, subset, mode, o.z_true);
    if (!c) {
      out.emplace_back();
      continue;
    }
    const auto oracle = *combine(o.estimates, subset, FusionMode::Oracle, o.z_true);
    out.push_back(ScoredObject{std::abs(c->depth - o.z_true), std::abs(oracle.depth - o.z_true), *c});
  }
  return out;
}
}  // namespace detail

/// Scores every (subset, mode) cell. When `clean` is given it must be the
/// uncorrupted version of `objects`; the recovery threshold for each cell is
/// then the q95 of that cell's clean errors. Otherwise it is the q95 over the
/// cell's unaffected objects. Cells with no affected object report 1.
inline EvalReport run_ablation(std::span<const EvalObject> objects,
                               std::span<const StrategySubset> subsets,
                               std::span<const FusionMode> modes,
                               std::span<const EvalObject> clean = {}) {
  if (objects.empty()) throw std::invalid_argument("run_ablation: no objects");
  if (!clean.empty() && clean.size() != objects.size())
    throw std::invalid_argument("run_ablation: clean reference differs in size");

  EvalReport report;
  for (const auto& subset : subsets) {
    for (FusionMode mode : modes) {
      const auto scored = detail::score_all(objects, subset, mode);
      EvalRow row;
      row.subset = subset.name();
      row.mode = mode;
      row.n_objects = objects.size();
      if (mode == FusionMode::Min) row.note = "interpretation: weighted depth with min member variance";

      double err = 0.0, oracle = 0.0, iters = 0.0, var = 0.0;
      std::size_t valid = 0, unused = 0;
      std::vector<double> reference;
      for (std::size_t i = 0; i < scored.size(); ++i) {
        if (!scored[i]) continue;
        const auto& s = *scored[i];
        ++row.n_scored;
        err += s.abs_error;
        oracle += s.oracle_error;
        iters += static_cast<double>(s.combined.iterations);
        var += s.combined.variance;
        valid += s.combined.n_valid;
        unused += s.combined.n_valid - s.combined.used.count();
        if (clean.empty() && !objects[i].affected) reference.push_back(s.abs_error);
      }
      if (row.n_scored) {
        const double n = static_cast<double>(row.n_scored);
        row.mae_combined = err / n;
        row.mae_oracle = oracle / n;
        row.mean_iterations = iters / n;
        row.mean_combined_variance = var / n;
        row.rejection_rate = valid ? static_cast<double>(unused) / static_cast<double>(valid) : 0.0;
      } else {
        row.mae_combined = row.mae_oracle = std::numeric_limits<double>::quiet_NaN();
      }

      if (!clean.empty()) {
        for (const auto& s : detail::score_all(clean, subset, mode))
          if (s) reference.push_back(s->abs_error);
      }
      std::size_t affected = 0, recovered = 0;
      const double threshold = quantile(reference, kRecoveryQuantile);
      for (std::size_t i = 0; i < scored.size(); ++i) {
        if (!objects[i].affected) continue;
        ++affected;
        if (scored[i] && scored[i]->abs_error < threshold) ++recovered;
      }
      row.collapse_recovery_rate =
          affected ? static_cast<double>(recovered) / static_cast<double>(affected) : 1.0;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

struct RecoveryStats {
  std::size_t n_objects = 0;
  std::size_t n_affected = 0;
  double threshold = 0.0;            // q95 of clean errors
  double recovery_rate = 1.0;        // affected objects with error below threshold
  double rejection_accuracy = 1.0;   // affected objects whose corrupted sources were all left out
  double false_rejection_rate = 0.0; // uncorrupted valid sources left out, on affected objects
  double mae_affected_clean = 0.0;
  double mae_affected_corrupted = 0.0;
};

/// Sources whose value or validity differ between two estimate sets.
inline SourceMask changed_sources(const DepthEstimates& a, const DepthEstimates& b) {
  SourceMask m;
  for (std::size_t s = 0; s < kNumDepths; ++s) {
    if (a[s].valid != b[s].valid) {
      m.set(s);
    } else if (a[s].valid &&
               std::abs(a[s].value - b[s].value) > 1e-9 * std::max(1.0, std::abs(a[s].value))) {
      m.set(s);
    }
  }
  return m;
}

/// How well a fusion mode recovers from an injected collapse. `clean` and
/// `corrupted` are index-aligned; `corrupted[i].affected` marks the victims.
inline RecoveryStats collapse_recovery(std::span<const EvalObject> clean,
                                       std::span<const EvalObject> corrupted,
                                       const StrategySubset& subset = StrategySubset::parse("EHK"),
                                       FusionMode mode = FusionMode::Iterative) {
  if (clean.size() != corrupted.size())
    throw std::invalid_argument("collapse_recovery: scene sizes differ");
  RecoveryStats st;
  st.n_objects = clean.size();

  const auto clean_scores = detail::score_all(clean, subset, mode);
  const auto bad_scores = detail::score_all(corrupted, subset, mode);
  std::vector<double> ref;
  for (const auto& s : clean_scores)
    if (s) ref.push_back(s->abs_error);
  st.threshold = quantile(ref, kRecoveryQuantile);

  std::size_t recovered = 0, with_target = 0, all_rejected = 0;
  std::size_t honest_valid = 0, honest_dropped = 0;
  double err_clean = 0.0, err_bad = 0.0;
  for (std::size_t i = 0; i < corrupted.size(); ++i) {
    if (!corrupted[i].affected) continue;
    ++st.n_affected;
    if (clean_scores[i]) err_clean += clean_scores[i]->abs_error;
    if (!bad_scores[i]) continue;
    const auto& s = *bad_scores[i];
    err_bad += s.abs_error;
    if (s.abs_error < st.threshold) ++recovered;

    const SourceMask moved = changed_sources(clean[i].estimates, corrupted[i].estimates);
    SourceMask target;
    for (const auto& e : corrupted[i].estimates) {
      if (!e.valid || !subset.contains(e.source)) continue;
      if (moved.test(e.source.index())) {
        target.set(e.source.index());
      } else {
        ++honest_valid;
        if (!s.combined.used.test(e.source.index())) ++honest_dropped;
      }
    }
    if (target.any()) {
      ++with_target;
      if ((target & s.combined.used).none()) ++all_rejected;
    }
  }
  if (st.n_affected) {
    const double n = static_cast<double>(st.n_affected);
    st.recovery_rate = static_cast<double>(recovered) / n;
    st.mae_affected_clean = err_clean / n;
    st.mae_affected_corrupted = err_bad / n;
  }
  if (with_target) st.rejection_accuracy = static_cast<double>(all_rejected) / static_cast<double>(with_target);
  if (honest_valid)
    st.false_rejection_rate = static_cast<double>(honest_dropped) / static_cast<double>(honest_valid);
  return st;
}

}  // namespace ddepth
