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

#ifndef LQSID_COMPARE_HPP_
#define LQSID_COMPARE_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lqsid/isoc.hpp"
#include "lqsid/model.hpp"
#include "lqsid/pipeline.hpp"
#include "lqsid/stats.hpp"

namespace lqsid {

enum class ModelKind { kLq, kLqg, kLqs };

// Published averages over a 14-subject human steering cohort (validation
// data). Kept for reference only; synthetic runs are not expected to match.
namespace human_reference {
inline constexpr double kLqsVafMeanPhi = 0.989;
inline constexpr double kLqsVafMeanPhiDot = 0.893;
inline constexpr double kLqgVafMeanPhi = 0.926;  // identical for LQ
inline constexpr double kLqgVafMeanPhiDot = 0.514;
inline constexpr double kAnovaPMeanPhi = 1.6e-4;
inline constexpr double kAnovaPMeanPhiDot = 2.5e-9;
}  // namespace human_reference

// Accepts "lq", "lqg" and "lqs" in any case.
ModelKind parse_model_kind(std::string_view name);
std::string model_name(ModelKind kind);  // "lq", "lqg", "lqs"
std::string model_label(ModelKind kind);  // "LQ", "LQG", "LQS"

// Forward problem of one model kind with the horizon, target and initial
// moments of `ensemble`.
ProblemFactory make_factory(const DrivingParams& driving,
                            const TrialEnsemble& ensemble, ModelKind kind);

// Objective weights of one model. LQ has no noise step.
struct ModelWeights {
  VafWeights cost;
  VafWeights noise;
};

struct CompareConfig {
  DrivingParams driving;
  // Search setup of the full LQS model. The LQ search keeps its cost sets;
  // the LQG search keeps the additive-noise sets.
  IsocConfig isoc = default_driving_isoc_config();
  ModelWeights lq;
  ModelWeights lqg;
  ModelWeights lqs;
  // sigma8 values at or below this count as "no control-dependent noise"
  // and are left out of the sigma8 summary.
  double sigma8_zero_tol = 1e-6;
  std::uint64_t seed = 0;
  int jobs = 0;

  CompareConfig();
  const ModelWeights& weights(ModelKind kind) const;
  // Rejects LQ weights with a covariance entry: LQ predicts no variance.
  void validate() const;
};

// Search setup actually used for `kind`, derived from the LQS setup.
// `lq_fit` supplies the cost weights that LQG reuses and `lqg_fit` the
// starting point of the LQS search.
IsocConfig model_isoc_config(const CompareConfig& cfg, ModelKind kind,
                             const ParamVectors* lq_fit = nullptr,
                             const ParamVectors* lqg_fit = nullptr);

// Per-signal fit of one model against one ensemble.
struct SignalVafs {
  double mean_phi = 0.0;
  double mean_phi_dot = 0.0;
  double var_phi = 0.0;  // NaN when the measured variance is constant
  double j_isoc = 0.0;   // under the model's cost weights
};

struct ModelEvaluation {
  SignalVafs vaf;
  ObservedMoments predicted;
};

// Re-solves the model at the ensemble's own horizon with M = [I2 0].
ModelEvaluation evaluate_model(const ProblemFactory& factory,
                               const ParamVectors& params,
                               const TrialEnsemble& ensemble,
                               const VafWeights& w,
                               const SolverOptions& opts = {});

struct ModelFit {
  ModelKind kind = ModelKind::kLqs;
  IsocResult result;
  ModelEvaluation train;
  ModelEvaluation validation;
};

// Identifies the chain LQ -> LQG -> LQS on the training ensemble up to
// `last` and evaluates each fit on both ensembles. Returns the fits in that
// order.
std::vector<ModelFit> identify_chain(const SubjectEnsembles& subject,
                                     const CompareConfig& cfg, ModelKind last,
                                     int jobs = 1);

struct ReportRow {
  std::string subject;
  ModelKind model = ModelKind::kLqs;
  std::string split;  // "train" or "validation"
  SignalVafs vaf;
  ParamVectors params;
};

struct AnovaRow {
  std::string split;
  std::string signal;  // "mean_phi", "mean_phi_dot", "var_phi"
  std::optional<AnovaResult> result;  // empty when not computable
  std::string note;
};

struct Sigma8Analysis {
  std::vector<std::string> subjects;
  std::vector<double> sigma8;
  std::vector<double> vaf_phi;      // validation
  std::vector<double> vaf_phi_dot;  // validation
  std::vector<bool> retained;
  std::optional<BoxSummary> box;  // over the retained values
  double median = 0.0;
};

// Drops sigma8 values at or below `zero_tol`, then 1.5 IQR outliers of the
// rest, and summarizes the retained values.
Sigma8Analysis sigma8_analysis(const std::vector<std::string>& subjects,
                               const std::vector<double>& sigma8,
                               const std::vector<double>& vaf_phi,
                               const std::vector<double>& vaf_phi_dot,
                               double zero_tol = 1e-6);

struct Trajectories {
  std::string subject;
  std::string split;
  ObservedMoments measured;
  std::vector<std::pair<ModelKind, ObservedMoments>> predicted;
};

struct ComparisonReport {
  std::vector<ModelKind> models;
  std::vector<ReportRow> rows;
  std::vector<ReportRow> averages;  // subject "average"
  std::vector<AnovaRow> anova;
  std::optional<Sigma8Analysis> sigma8;
  std::vector<std::string> warnings;
  std::vector<Trajectories> trajectories;
  std::vector<std::pair<std::string, IsocResult>> fits;  // "<subject>/<model>"
  double sigma8_zero_tol = 1e-6;

  const ReportRow& row(const std::string& subject, ModelKind model,
                       const std::string& split) const;
};

// Identifies and evaluates every model on every subject (subjects run in
// parallel) and assembles the tables, the ANOVA over subjects with the
// model as factor, and the sigma8 summary.
ComparisonReport run_comparison(const std::vector<SubjectEnsembles>& subjects,
                                const CompareConfig& cfg,
                                const std::vector<ModelKind>& models = {
                                    ModelKind::kLq, ModelKind::kLqg,
                                    ModelKind::kLqs});

// Assembles averages, ANOVA, sigma8 summary and warnings from the rows.
void finalize_report(ComparisonReport& report);

// report.json, the per-subject trajectory CSVs and the fit traces.
void write_report(const std::filesystem::path& dir,
                  const ComparisonReport& report);
// Reads what write_report wrote (without the traces).
ComparisonReport read_report(const std::filesystem::path& dir);
// CSV tables and SVG figures derived from a report.
void render_report(const std::filesystem::path& dir,
                   const ComparisonReport& report);

void to_json(nlohmann::json& j, const CompareConfig& c);
void from_json(const nlohmann::json& j, CompareConfig& c);
void to_json(nlohmann::json& j, const SignalVafs& v);
void from_json(const nlohmann::json& j, SignalVafs& v);

}  // namespace lqsid

#endif  // LQSID_COMPARE_HPP_
