#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ddepth/report.hpp"
#include "support.hpp"

using namespace ddepth;
using ddepth::testing::fixture;
using ddepth::testing::run_fixture;

namespace {
DepthEstimates estimates_from(const std::vector<std::pair<std::size_t, std::pair<double, double>>>& xs) {
  DepthEstimates out;
  for (std::size_t i = 0; i < kNumDepths; ++i) out[i].source = DepthSource(i);
  for (const auto& [src, vs] : xs) out[src] = {vs.first, vs.second, DepthSource(src), true};
  return out;
}

const EvalRow& row(const EvalReport& r, const std::string& subset, FusionMode m) {
  for (const auto& x : r.rows)
    if (x.subset == subset && x.mode == m) return x;
  throw std::runtime_error("row not found");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}
}  // namespace

TEST(StrategySubset, ParseAndContain) {
  const auto ehk = StrategySubset::parse("EHK");
  EXPECT_EQ(ehk.name(), "EHK");
  EXPECT_EQ(StrategySubset::parse("KE").name(), "EK");
  EXPECT_THROW(StrategySubset::parse(""), ConfigError);
  EXPECT_THROW(StrategySubset::parse("EX"), ConfigError);
  EXPECT_THROW(StrategySubset::parse("EE"), ConfigError);
  EXPECT_EQ(StrategySubset::all().size(), 7U);
  EXPECT_TRUE(ehk.contains(StrategySubset::parse("EH")));
  EXPECT_FALSE(StrategySubset::parse("EH").contains(ehk));
  const auto h = StrategySubset::parse("H");
  EXPECT_FALSE(h.contains(DepthSource::direct()));
  EXPECT_TRUE(h.contains(DepthSource::height_h24()));
  EXPECT_FALSE(h.contains(DepthSource::keypoint_v(2)));
}

TEST(FusionModeNames, RoundTrip) {
  for (FusionMode m : all_fusion_modes()) EXPECT_EQ(parse_fusion_mode(to_string(m)), m);
  EXPECT_THROW(parse_fusion_mode("median"), ConfigError);
}

TEST(OracleSelect, Examples) {
  const auto est = estimates_from({{0, {9, 1}}, {1, {11, 1}}, {2, {30, 1}}});
  EXPECT_EQ(oracle_select(est, 10).value, 9);
  const auto one = estimates_from({{5, {42, 1}}});
  EXPECT_EQ(oracle_select(one, 10).value, 42);
  EXPECT_THROW(oracle_select(estimates_from({}), 10), std::invalid_argument);
}

TEST(Mae, Examples) {
  const std::vector<double> t = {10, 10};
  EXPECT_EQ(mae(t, t), 0);
  EXPECT_EQ(mae(std::vector<double>{8, 12}, t), 2);
  EXPECT_EQ(mae(std::vector<double>{8, 12}, std::vector<double>{8, 11}), 0.5);
  EXPECT_THROW(mae(std::vector<double>{1}, t), std::invalid_argument);
}

TEST(Quantile, LinearInterpolation) {
  EXPECT_EQ(quantile({3, 1, 2, 4, 5}, 0.5), 3);
  EXPECT_DOUBLE_EQ(quantile({1, 2}, 0.95), 1.95);
  EXPECT_TRUE(std::isnan(quantile({}, 0.5)));
}

TEST(Combine, ModesOnHandSet) {
  // E=10 (var 1), H5=20 (var 4), U0=12 (var 1)
  const auto est = estimates_from({{0, {10, 1}}, {1, {20, 2}}, {4, {12, 1}}});
  const auto all = StrategySubset::parse("EHK");
  EXPECT_EQ(combine(est, all, FusionMode::Hard, 0)->depth, 10);
  EXPECT_NEAR(combine(est, all, FusionMode::Mean, 0)->depth, 14, 1e-12);
  const auto w = *combine(est, all, FusionMode::Weighted, 0);
  EXPECT_NEAR(w.depth, (10 + 20 / 4.0 + 12) / 2.25, 1e-12);
  EXPECT_NEAR(w.variance, 1 / 2.25, 1e-12);
  const auto mn = *combine(est, all, FusionMode::Min, 0);
  EXPECT_EQ(mn.depth, w.depth);
  EXPECT_EQ(mn.variance, 1);
  // Seeds on E (lowest index among var 1); band (7, 13) admits U0 and the
  // fused set (11, var 0.5) then admits nothing else; H5 = 20 stays out.
  const auto it = *combine(est, all, FusionMode::Iterative, 0);
  EXPECT_EQ(it.depth, 11);
  EXPECT_EQ(it.used.count(), 2U);
  EXPECT_FALSE(it.used.test(1));
  EXPECT_EQ(combine(est, all, FusionMode::Oracle, 19.5)->depth, 20);
  EXPECT_EQ(combine(est, StrategySubset::parse("H"), FusionMode::Weighted, 0)->depth, 20);
  EXPECT_FALSE(combine(estimates_from({{0, {10, 1}}}), StrategySubset::parse("K"), FusionMode::Mean, 0));
}

TEST(Combine, SingletonSubsetAllModesAgree) {
  const auto est = estimates_from({{0, {17.5, 0.8}}, {1, {20, 2}}, {4, {12, 1}}});
  const auto e = StrategySubset::parse("E");
  for (FusionMode m : all_fusion_modes()) EXPECT_EQ(combine(est, e, m, 3.0)->depth, 17.5) << to_string(m);
}

TEST(RunAblation, RowsAndOrder) {
  const auto r = run_fixture("ablate.json");
  const auto subsets = StrategySubset::all();
  const auto modes = all_fusion_modes();
  const EvalReport rep = run_ablation(r.clean, subsets, modes);
  ASSERT_EQ(rep.rows.size(), subsets.size() * modes.size());
  std::size_t i = 0;
  for (const auto& s : subsets)
    for (FusionMode m : modes) {
      EXPECT_EQ(rep.rows[i].subset, s.name());
      EXPECT_EQ(rep.rows[i].mode, m);
      EXPECT_EQ(rep.rows[i].note.empty(), m != FusionMode::Min);
      EXPECT_EQ(rep.rows[i].collapse_recovery_rate, 1.0);
      ++i;
    }
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.n_objects, r.clean.size());
    EXPECT_GE(row.rejection_rate, 0);
    EXPECT_LE(row.rejection_rate, 1);
  }
  for (FusionMode m : modes) EXPECT_EQ(row(rep, "E", m).mae_combined, row(rep, "E", FusionMode::Hard).mae_combined);
}

TEST(RunAblation, OracleDominatesOnSeededFixture) {
  const auto r = run_fixture("ablate.json");
  const EvalReport rep = run_ablation(r.clean, StrategySubset::all(), all_fusion_modes());
  for (const auto& x : rep.rows) {
    EXPECT_LE(x.mae_oracle, x.mae_combined + 1e-12) << x.subset << " " << to_string(x.mode);
    EXPECT_EQ(x.mae_oracle, row(rep, x.subset, FusionMode::Oracle).mae_combined);
  }
}

TEST(RunAblation, OracleMonotoneAcrossNestedSubsets) {
  const auto r = run_fixture("ablate.json");
  const std::vector<StrategySubset> chain = {StrategySubset::parse("E"), StrategySubset::parse("EH"),
                                             StrategySubset::parse("EHK")};
  for (const auto& o : r.clean) {
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& s : chain) {
      const auto c = combine(o.estimates, s, FusionMode::Oracle, o.z_true);
      if (!c) continue;
      const double err = std::abs(c->depth - o.z_true);
      EXPECT_LE(err, prev);
      prev = err;
    }
  }
  const EvalReport rep = run_ablation(r.clean, chain, std::vector<FusionMode>{FusionMode::Oracle});
  EXPECT_GE(rep.rows[0].mae_oracle, rep.rows[1].mae_oracle);
  EXPECT_GE(rep.rows[1].mae_oracle, rep.rows[2].mae_oracle);
}

TEST(RunAblation, CombinedInsideSelectedHull) {
  const auto r = run_fixture("ablate.json");
  const auto all = StrategySubset::parse("EHK");
  for (const auto& o : r.clean) {
    const auto c = *combine(o.estimates, all, FusionMode::Iterative, o.z_true);
    double lo = 1e300, hi = -1e300;
    for (const auto& e : o.estimates)
      if (c.used.test(e.source.index())) {
        lo = std::min(lo, e.value);
        hi = std::max(hi, e.value);
      }
    EXPECT_GE(c.depth, lo - 1e-9);
    EXPECT_LE(c.depth, hi + 1e-9);
  }
}

TEST(RunAblation, IterativeBeatsWeightedUnderDishonestCollapse) {
  const auto reg = load_json_file(fixture("regression.json")).at("dishonest_collapse");
  const auto r = run_fixture("collapse_dishonest.json");
  const auto subsets = std::vector<StrategySubset>{StrategySubset::parse("EHK")};
  const auto modes = std::vector<FusionMode>{FusionMode::Weighted, FusionMode::Iterative};
  const EvalReport rep = run_ablation(r.corrupted, subsets, modes, r.clean);
  const double w = rep.rows[0].mae_combined, it = rep.rows[1].mae_combined;
  EXPECT_LE(it, w);
  EXPECT_NEAR(w, reg.at("weighted").get<double>(), 1e-9 * w);
  EXPECT_NEAR(it, reg.at("iterative").get<double>(), 1e-9 * it);
}

TEST(RunAblation, Deterministic) {
  const auto a = run_fixture("ablate.json");
  const auto b = run_fixture("ablate.json");
  const auto ra = run_ablation(a.clean, StrategySubset::all(), all_fusion_modes());
  const auto rb = run_ablation(b.clean, StrategySubset::all(), all_fusion_modes());
  EXPECT_EQ(to_csv(to_table(ra), {}), to_csv(to_table(rb), {}));
}

TEST(CollapseRecovery, ZeroFractionRecoversByConvention) {
  const auto r = run_fixture("ablate.json");
  const RecoveryStats st = collapse_recovery(r.clean, r.clean);
  EXPECT_EQ(st.n_affected, 0U);
  EXPECT_EQ(st.recovery_rate, 1.0);
  EXPECT_EQ(st.rejection_accuracy, 1.0);
  EXPECT_EQ(st.false_rejection_rate, 0.0);
}

TEST(CollapseRecovery, HonestSeparatedCorruptionIsAlwaysRejected) {
  const auto r = run_fixture("collapse.json");
  const auto st = collapse_recovery(r.clean, r.corrupted);
  EXPECT_EQ(st.n_affected, 100U);
  EXPECT_EQ(st.rejection_accuracy, 1.0);
  EXPECT_GE(st.recovery_rate, 0);
  EXPECT_LE(st.recovery_rate, 1);
}

TEST(CollapseRecovery, OverconfidentCorruptionStatisticIsRecorded) {
  const auto r = run_fixture("collapse_overconfident.json");
  const auto st = collapse_recovery(r.clean, r.corrupted);
  EXPECT_EQ(st.n_affected, 100U);
  for (double x : {st.recovery_rate, st.rejection_accuracy, st.false_rejection_rate}) {
    EXPECT_GE(x, 0);
    EXPECT_LE(x, 1);
  }
}

TEST(EmitReport, HeaderOnlyRowCountAndByteIdentical) {
  const auto dir = std::filesystem::temp_directory_path() / "ddepth_emit_test";
  std::filesystem::create_directories(dir);
  const std::string empty = (dir / "empty.csv").string();
  emit_report(EvalReport{}, {{"k", 1}}, empty);
  std::istringstream lines(slurp(empty));
  std::string first, header, extra;
  std::getline(lines, first);
  std::getline(lines, header);
  EXPECT_EQ(first.rfind("# config: ", 0), 0U);
  EXPECT_EQ(header, "subset,mode,n_objects,n_scored,mae_combined,mae_oracle,rejection_rate,mean_iterations,mean_combined_variance,collapse_recovery_rate,note");
  EXPECT_FALSE(std::getline(lines, extra));

  const auto r = run_fixture("ablate.json");
  const auto subsets = std::vector<StrategySubset>{StrategySubset::parse("E"), StrategySubset::parse("HK")};
  const auto rep = run_ablation(r.clean, subsets, all_fusion_modes());
  const std::string a = (dir / "a.csv").string(), b = (dir / "b.csv").string();
  emit_report(rep, {{"seed", 1}}, a);
  emit_report(rep, {{"seed", 1}}, b);
  EXPECT_EQ(slurp(a), slurp(b));
  std::istringstream body(slurp(a));
  std::size_t n = 0;
  for (std::string l; std::getline(body, l);) ++n;
  EXPECT_EQ(n, 2 + subsets.size() * all_fusion_modes().size());

  const std::string js = (dir / "a.json").string();
  emit_report(rep, {{"seed", 1}}, js, ReportFormat::Json);
  const json parsed = load_json_file(js);
  EXPECT_EQ(parsed.at("rows").size(), 12U);
  EXPECT_EQ(parsed.at("config").at("seed"), 1);
  EXPECT_THROW(emit_report(rep, {}, (dir / "missing" / "x.csv").string()), std::runtime_error);
}

TEST(RunAblation, OracleMaeMatchesRecordedAndStrictlyDecreases) {
  const auto reg = load_json_file(fixture("regression.json"));
  const double tol = reg.at("tolerance_rel").get<double>();
  const auto r = run_fixture(reg.at("oracle_mae").at("config").get<std::string>());
  const std::vector<StrategySubset> chain = {StrategySubset::parse("E"), StrategySubset::parse("EH"),
                                             StrategySubset::parse("EHK")};
  const auto rep = run_ablation(r.clean, chain, std::vector<FusionMode>{FusionMode::Oracle});
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const double want = reg.at("oracle_mae").at(chain[i].name()).get<double>();
    EXPECT_NEAR(rep.rows[i].mae_oracle, want, tol * want) << chain[i].name();
  }
  EXPECT_GT(rep.rows[0].mae_oracle, rep.rows[1].mae_oracle);
  EXPECT_GT(rep.rows[1].mae_oracle, rep.rows[2].mae_oracle);
}
