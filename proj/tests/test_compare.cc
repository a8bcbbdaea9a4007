// Copyright 2026 The lqsid Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lqsid/compare.hpp"
#include "lqsid/error.hpp"
#include "lqsid/io.hpp"

namespace lqsid {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ModelKind, ParsesNames) {
  EXPECT_EQ(parse_model_kind("lq"), ModelKind::kLq);
  EXPECT_EQ(parse_model_kind("LQG"), ModelKind::kLqg);
  EXPECT_EQ(parse_model_kind("Lqs"), ModelKind::kLqs);
  EXPECT_THROW(parse_model_kind("lqr"), InvalidArgument);
  EXPECT_EQ(model_name(ModelKind::kLqg), "lqg");
  EXPECT_EQ(model_label(ModelKind::kLqs), "LQS");
}

TEST(CompareConfig, DefaultsValidateAndRoundTrip) {
  const CompareConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_FALSE(c.lq.cost.has_covariance_weight());
  EXPECT_EQ(c.lqs.cost.w_v(0), 0.1);
  EXPECT_EQ(c.lqs.noise.w_v(0), 0.9);
  const CompareConfig back = nlohmann::json(c).get<CompareConfig>();
  EXPECT_EQ(nlohmann::json(back).dump(), nlohmann::json(c).dump());
}

TEST(CompareConfig, LqWithVarianceWeightIsRejected) {
  CompareConfig c;
  c.lq.cost.w_v(0) = 0.1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  nlohmann::json j = CompareConfig{};
  j["weights"]["lq"]["cost"]["w_v"] = {0.1, 0.0};
  EXPECT_THROW(j.get<CompareConfig>(), InvalidArgument);
}

TEST(ModelIsocConfig, RestrictsParametersPerModel) {
  const CompareConfig c;
  const IsocConfig lq = model_isoc_config(c, ModelKind::kLq);
  EXPECT_TRUE(lq.searched(false).empty());
  EXPECT_EQ(lq.searched(true).size(), 3u);
  EXPECT_TRUE(lq.fixed.sigma.isZero());

  ParamVectors lq_fit = c.isoc.fixed;
  lq_fit.s << 2e4, 300, 50, 1;
  EXPECT_THROW(model_isoc_config(c, ModelKind::kLqg), InvalidArgument);
  const IsocConfig lqg = model_isoc_config(c, ModelKind::kLqg, &lq_fit);
  EXPECT_TRUE(lqg.searched(true).empty());
  for (const ParamRef& r : lqg.searched(false)) EXPECT_LT(r.index, 7);
  EXPECT_EQ(lqg.searched(false).size(), 7u);
  EXPECT_EQ(lqg.fixed.s, lq_fit.s);

  ParamVectors lqg_fit = lq_fit;
  lqg_fit.sigma(1) = 0.02;
  const IsocConfig lqs = model_isoc_config(c, ModelKind::kLqs, &lq_fit, &lqg_fit);
  EXPECT_FALSE(lqs.start_at_midpoint);
  EXPECT_EQ(lqs.fixed.sigma, lqg_fit.sigma);
  EXPECT_EQ(lqs.searched(false).size(), 11u);
}

TEST(EvaluateModel, GeneratingModelOnOwnMomentsScoresOne) {
  const SubjectEnsembles subj = fixture::subject("S01", 3, 6);
  const CompareConfig c;
  const ProblemFactory f = make_factory(c.driving, subj.train, ModelKind::kLqs);
  TrialEnsemble own = subj.train;
  own.moments = predict(f, fixture::truth_params(), leading_selection(2, 5));
  const ModelEvaluation e = evaluate_model(f, fixture::truth_params(), own, c.lqs.cost);
  EXPECT_EQ(e.vaf.mean_phi, 1.0);
  EXPECT_EQ(e.vaf.mean_phi_dot, 1.0);
  EXPECT_EQ(e.vaf.var_phi, 1.0);
  EXPECT_EQ(e.vaf.j_isoc, 1.0);
}

TEST(MakeFactory, UsesEnsembleHorizonTargetAndStart) {
  const SubjectEnsembles subj = fixture::subject("S01", 4, 6);
  const CompareConfig c;
  const LqsProblem p =
      make_factory(c.driving, subj.validation, ModelKind::kLqg)(fixture::truth_params());
  EXPECT_EQ(p.N, subj.validation.N);
  EXPECT_DOUBLE_EQ(p.x0_mean(kTarget), subj.validation.target);
  EXPECT_DOUBLE_EQ(p.x0_mean(kPhi), subj.validation.moments.mean[0](0));
  EXPECT_FALSE(p.has_signal_dependent_noise());
  const LqsProblem lq =
      make_factory(c.driving, subj.train, ModelKind::kLq)(fixture::truth_params());
  EXPECT_TRUE(lq.fully_observed);
}

TEST(IdentifyChain, LqAndLqgShareMeansAndLqsNestsLqg) {
  const SubjectEnsembles subj = fixture::subject("S01", 21, 8);
  const std::vector<ModelFit> fits =
      identify_chain(subj, fixture::quick_compare_config(), ModelKind::kLqs, 1);
  ASSERT_EQ(fits.size(), 3u);
  EXPECT_EQ(fits[0].kind, ModelKind::kLq);
  EXPECT_EQ(fits[2].kind, ModelKind::kLqs);
  for (ModelEvaluation ModelFit::*split : {&ModelFit::train, &ModelFit::validation}) {
    const SignalVafs& lq = (fits[0].*split).vaf;
    const SignalVafs& lqg = (fits[1].*split).vaf;
    EXPECT_NEAR(lq.mean_phi, lqg.mean_phi, 1e-9);
    EXPECT_NEAR(lq.mean_phi_dot, lqg.mean_phi_dot, 1e-9);
  }
  EXPECT_EQ(fits[1].result.params.s, fits[0].result.params.s);
  EXPECT_EQ(fits[1].result.params.sigma.tail(4), Eigen::VectorXd::Zero(4));
  EXPECT_GE(fits[2].result.j_isoc, fits[1].result.j_isoc);

  const std::vector<ModelFit> lq_only =
      identify_chain(subj, fixture::quick_compare_config(), ModelKind::kLq, 1);
  ASSERT_EQ(lq_only.size(), 1u);
  EXPECT_EQ(lq_only[0].result.params.s, fits[0].result.params.s);
}

TEST(Sigma8Analysis, EqualValuesKeepEverything) {
  const Sigma8Analysis a =
      sigma8_analysis({"a", "b", "c"}, {0.3, 0.3, 0.3}, {1, 1, 1}, {1, 1, 1});
  ASSERT_TRUE(a.box.has_value());
  EXPECT_EQ(a.box->outliers.size(), 0u);
  EXPECT_EQ(a.median, 0.3);
  EXPECT_EQ(a.retained, (std::vector<bool>{true, true, true}));
}

TEST(Sigma8Analysis, DropsZerosAndOutliers) {
  const Sigma8Analysis a = sigma8_analysis(
      {"a", "b", "c", "d", "e", "f"}, {0.0, 0.29, 0.31, 0.30, 0.32, 2.0},
      std::vector<double>(6, 0.99), std::vector<double>(6, 0.9));
  EXPECT_EQ(a.retained, (std::vector<bool>{false, true, true, true, true, false}));
  EXPECT_NEAR(a.median, 0.305, 1e-12);
  EXPECT_THROW(sigma8_analysis({"a"}, {0.1, 0.2}, {1}, {1}), InvalidArgument);
}

ReportRow make_row(const std::string& subject, ModelKind m, const std::string& split,
                   double phi, double phi_dot, double var) {
  ReportRow r;
  r.subject = subject;
  r.model = m;
  r.split = split;
  r.vaf = {phi, phi_dot, var, 0.5 * (phi + phi_dot)};
  r.params.s(3) = 1.0;
  if (m == ModelKind::kLqs) r.params.sigma(7) = 0.25 + 0.01 * subject.back();
  return r;
}

ComparisonReport handmade_report() {
  ComparisonReport rep;
  rep.models = {ModelKind::kLq, ModelKind::kLqg, ModelKind::kLqs};
  const double bump[] = {0.0, 0.0, 0.04};
  for (int s = 0; s < 4; ++s) {
    const std::string id = "S0" + std::to_string(s + 1);
    for (int m = 0; m < 3; ++m) {
      const ModelKind kind = rep.models[m];
      const double noise = 0.003 * s;
      for (const char* split : {"train", "validation"}) {
        rep.rows.push_back(make_row(id, kind, split, 0.95 + bump[m] + noise,
                                    0.9 + bump[m] - noise,
                                    m == 2 ? 0.6 - 0.1 * s : -0.5));
      }
    }
  }
  finalize_report(rep);
  return rep;
}

TEST(FinalizeReport, AveragesAnovaAndWarnings) {
  const ComparisonReport rep = handmade_report();
  const ReportRow& avg = [&]() -> const ReportRow& {
    for (const auto& r : rep.averages) {
      if (r.model == ModelKind::kLqs && r.split == "validation") return r;
    }
    throw std::runtime_error("missing");
  }();
  EXPECT_NEAR(avg.vaf.mean_phi, 0.99 + 0.0045, 1e-12);
  ASSERT_EQ(rep.anova.size(), 6u);
  for (const AnovaRow& a : rep.anova) {
    if (a.signal != "mean_phi") continue;
    ASSERT_TRUE(a.result.has_value());
    EXPECT_EQ(a.result->df_between, 2);
    EXPECT_EQ(a.result->df_within, 9);
    EXPECT_LT(a.result->p, 0.05);
  }
  ASSERT_TRUE(rep.sigma8.has_value());
  EXPECT_EQ(rep.sigma8->sigma8.size(), 4u);
  // LQ and LQG validation variance VAFs are negative in every subject.
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_EQ(rep.row("S02", ModelKind::kLqg, "train").vaf.var_phi, -0.5);
  EXPECT_THROW(rep.row("S09", ModelKind::kLq, "train"), InvalidArgument);
}

TEST(ReportFiles, WriteReadRenderAreDeterministic) {
  const ComparisonReport rep = handmade_report();
  const fs::path a = fs::temp_directory_path() / "lqsid_report_a";
  const fs::path b = fs::temp_directory_path() / "lqsid_report_b";
  fs::remove_all(a);
  fs::remove_all(b);
  write_report(a, rep);
  render_report(a, rep);
  write_report(b, rep);
  render_report(b, rep);
  for (const char* f : {"report.json", "vaf_table.csv", "averages.csv", "anova.csv",
                        "sigma8.csv", "plots/sigma8.svg", "plots/vaf_validation.svg"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const ComparisonReport back = read_report(a);
  EXPECT_EQ(back.rows.size(), rep.rows.size());
  EXPECT_EQ(back.row("S03", ModelKind::kLqs, "validation").vaf.var_phi,
            rep.row("S03", ModelKind::kLqs, "validation").vaf.var_phi);
  EXPECT_EQ(back.anova.size(), rep.anova.size());
  const nlohmann::json j = read_json(a / "report.json");
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_TRUE(j.contains("anova_design"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunComparison, SmallCohortEndToEnd) {
  std::vector<SubjectEnsembles> subjects = {fixture::subject("S01", 31, 6),
                                            fixture::subject("S02", 32, 6),
                                            fixture::subject("S03", 33, 6)};
  CompareConfig c = fixture::quick_compare_config();
  c.seed = 5;
  const auto t0 = std::chrono::steady_clock::now();
  const ComparisonReport rep = run_comparison(subjects, c);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(rep.rows.size(), 3u * 3u * 2u);
  EXPECT_EQ(rep.trajectories.size(), 6u);
  EXPECT_EQ(rep.fits.size(), 9u);
  for (const auto& s : subjects) {
    for (const char* split : {"train", "validation"}) {
      EXPECT_NEAR(rep.row(s.subject_id, ModelKind::kLq, split).vaf.mean_phi,
                  rep.row(s.subject_id, ModelKind::kLqg, split).vaf.mean_phi, 1e-9);
    }
  }
  ASSERT_TRUE(rep.sigma8.has_value());
  const fs::path dir = fs::temp_directory_path() / "lqsid_run_comparison";
  fs::remove_all(dir);
  write_report(dir, rep);
  render_report(dir, rep);
  EXPECT_TRUE(fs::exists(dir / "traj_S01_train.csv"));
  EXPECT_TRUE(fs::exists(dir / "plots" / "traj_S02_validation.svg"));
  EXPECT_TRUE(fs::exists(dir / "fits" / "S03_lqs.json"));
  fs::remove_all(dir);
  RecordProperty("seconds", std::to_string(secs));
}

}  // namespace
}  // namespace lqsid
