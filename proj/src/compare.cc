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

#include "lqsid/compare.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"
#include "lqsid/parallel.hpp"
#include "lqsid/svg.hpp"

namespace lqsid {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr int kAdditiveNoiseCount = 7;  // sigma1..sigma7
const char* const kSplits[] = {"train", "validation"};
const char* const kSignals[] = {"mean_phi", "mean_phi_dot", "var_phi"};

constexpr ModelKind kChain[] = {ModelKind::kLq, ModelKind::kLqg, ModelKind::kLqs};

double signal_value(const SignalVafs& v, const std::string& signal) {
  if (signal == "mean_phi") return v.mean_phi;
  if (signal == "mean_phi_dot") return v.mean_phi_dot;
  if (signal == "var_phi") return v.var_phi;
  return v.j_isoc;
}

double json_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return kNaN;
  return j.at(key).get<double>();
}

// Keeps only the sets whose entries all satisfy `keep`; drops the bounds of
// everything that is no longer searched.
void restrict_sets(IsocConfig& c, const std::function<bool(const ParamRef&)>& keep) {
  std::vector<std::vector<ParamRef>> sets;
  for (const auto& set : c.parameter_sets) {
    std::vector<ParamRef> kept;
    for (const auto& r : set) {
      if (keep(r)) kept.push_back(r);
    }
    if (!kept.empty()) sets.push_back(std::move(kept));
  }
  c.parameter_sets = std::move(sets);
  std::erase_if(c.bounds, [&](const auto& kv) { return !keep(kv.first); });
}

std::string trajectory_file(const Trajectories& t) {
  return "traj_" + t.subject + "_" + t.split + ".csv";
}

nlohmann::json row_json(const ReportRow& r, bool with_params) {
  nlohmann::json j = {{"subject", r.subject},
                      {"model", model_name(r.model)},
                      {"split", r.split},
                      {"vaf", r.vaf}};
  if (with_params) j["params"] = r.params;
  return j;
}

ReportRow row_from_json(const nlohmann::json& j) {
  ReportRow r;
  r.subject = j.at("subject").get<std::string>();
  r.model = parse_model_kind(j.at("model").get<std::string>());
  r.split = j.at("split").get<std::string>();
  r.vaf = j.at("vaf").get<SignalVafs>();
  if (j.contains("params")) r.params = j.at("params").get<ParamVectors>();
  return r;
}

}  // namespace

ModelKind parse_model_kind(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "lq") return ModelKind::kLq;
  if (s == "lqg") return ModelKind::kLqg;
  if (s == "lqs") return ModelKind::kLqs;
  throw InvalidArgument("unknown model '" + std::string(name) +
                        "' (expected lq, lqg or lqs)");
}

std::string model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLq: return "lq";
    case ModelKind::kLqg: return "lqg";
    case ModelKind::kLqs: return "lqs";
  }
  return "?";
}

std::string model_label(ModelKind kind) {
  std::string s = model_name(kind);
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

ProblemFactory make_factory(const DrivingParams& driving,
                            const TrialEnsemble& ensemble, ModelKind kind) {
  if (ensemble.moments.size() == 0) {
    throw InvalidArgument("compare: ensemble has no moments");
  }
  DrivingParams p = driving;
  p.N = ensemble.N;
  p.phi_ref = ensemble.target;
  const Eigen::Vector2d m0 = ensemble.moments.mean.front();
  const Eigen::Matrix2d c0 = ensemble.moments.cov.front();
  return [p, m0, c0, kind](const ParamVectors& params) {
    LqsProblem prob = build_driving_problem(p, params);
    set_driving_initial_state(prob, p, m0, c0);
    switch (kind) {
      case ModelKind::kLq: return reduce_to_lq(prob);
      case ModelKind::kLqg: return reduce_to_lqg(prob);
      case ModelKind::kLqs: break;
    }
    return prob;
  };
}

CompareConfig::CompareConfig() {
  const Eigen::Vector2d mean_heavy(0.9, 0.9), mean_light(0.1, 0.1);
  const Eigen::Vector2d var_light(0.1, 0.0), var_heavy(0.9, 0.0);
  lq.cost = VafWeights::diagonal(mean_heavy, Eigen::Vector2d::Zero());
  lq.noise = lq.cost;
  lqg.cost = VafWeights::diagonal(mean_heavy, var_light);
  lqg.noise = VafWeights::diagonal(mean_light, var_heavy);
  lqs = lqg;
}

const ModelWeights& CompareConfig::weights(ModelKind kind) const {
  switch (kind) {
    case ModelKind::kLq: return lq;
    case ModelKind::kLqg: return lqg;
    case ModelKind::kLqs: break;
  }
  return lqs;
}

void CompareConfig::validate() const {
  driving.validate();
  isoc.validate();
  for (ModelKind k : kChain) {
    const ModelWeights& w = weights(k);
    w.cost.validate();
    w.noise.validate();
    if (w.cost.dim() != 2 || w.noise.dim() != 2) {
      throw InvalidArgument("weights for " + model_name(k) +
                            " must cover (phi, phi_dot)");
    }
  }
  if (lq.cost.has_covariance_weight() || lq.noise.has_covariance_weight()) {
    throw InvalidArgument(
        "weights for lq must have w_v = 0: the LQ model predicts no variance");
  }
  if (!(sigma8_zero_tol >= 0.0)) {
    throw InvalidArgument("sigma8_zero_tol must be >= 0");
  }
}

IsocConfig model_isoc_config(const CompareConfig& cfg, ModelKind kind,
                             const ParamVectors* lq_fit,
                             const ParamVectors* lqg_fit) {
  IsocConfig c = cfg.isoc;
  switch (kind) {
    case ModelKind::kLq:
      restrict_sets(c, [](const ParamRef& r) { return r.cost; });
      c.fixed.sigma.setZero();
      break;
    case ModelKind::kLqg:
      if (!lq_fit) throw InvalidArgument("compare: LQG needs the LQ fit");
      // The cost weights stay those of LQ, so both predict the same mean.
      restrict_sets(c, [](const ParamRef& r) {
        return !r.cost && r.index < kAdditiveNoiseCount;
      });
      c.fixed.s = lq_fit->s;
      c.fixed.sigma.tail(ParamVectors::kNoiseSize - kAdditiveNoiseCount).setZero();
      break;
    case ModelKind::kLqs:
      if (lqg_fit) {
        // Starting at the LQG optimum nests the LQG solution in the search.
        c.fixed = *lqg_fit;
        c.start_at_midpoint = false;
      }
      break;
  }
  if (c.parameter_sets.empty()) {
    throw InvalidArgument("compare: no parameters left to search for " +
                          model_name(kind));
  }
  return c;
}

ModelEvaluation evaluate_model(const ProblemFactory& factory,
                               const ParamVectors& params,
                               const TrialEnsemble& ensemble,
                               const VafWeights& w, const SolverOptions& opts) {
  const Eigen::MatrixXd M = leading_selection(2, kDrivingStates);
  ModelEvaluation out;
  out.predicted = predict(factory, params, M, opts);
  const VafBreakdown b = vaf_breakdown(out.predicted, ensemble.moments);
  out.vaf.mean_phi = b.mean(0);
  out.vaf.mean_phi_dot = b.mean(1);
  out.vaf.var_phi = b.cov(0, 0);
  out.vaf.j_isoc = j_isoc(out.predicted, ensemble.moments, w);
  return out;
}

std::vector<ModelFit> identify_chain(const SubjectEnsembles& subject,
                                     const CompareConfig& cfg, ModelKind last,
                                     int jobs) {
  cfg.validate();
  const Eigen::MatrixXd M = leading_selection(2, kDrivingStates);
  std::vector<ModelFit> fits;
  for (ModelKind kind : kChain) {
    const ParamVectors* lq = fits.size() > 0 ? &fits[0].result.params : nullptr;
    const ParamVectors* lqg = fits.size() > 1 ? &fits[1].result.params : nullptr;
    const IsocConfig ic = model_isoc_config(cfg, kind, lq, lqg);
    const ModelWeights& w = cfg.weights(kind);
    ModelFit fit;
    fit.kind = kind;
    fit.result = identify(make_factory(cfg.driving, subject.train, kind),
                          subject.train.moments, M, ic, w.cost, w.noise,
                          cfg.seed, jobs);
    fit.train = evaluate_model(make_factory(cfg.driving, subject.train, kind),
                               fit.result.params, subject.train, w.cost,
                               ic.solver);
    fit.validation =
        evaluate_model(make_factory(cfg.driving, subject.validation, kind),
                       fit.result.params, subject.validation, w.cost, ic.solver);
    fits.push_back(std::move(fit));
    if (kind == last) break;
  }
  return fits;
}

Sigma8Analysis sigma8_analysis(const std::vector<std::string>& subjects,
                               const std::vector<double>& sigma8,
                               const std::vector<double>& vaf_phi,
                               const std::vector<double>& vaf_phi_dot,
                               double zero_tol) {
  const std::size_t n = sigma8.size();
  if (subjects.size() != n || vaf_phi.size() != n || vaf_phi_dot.size() != n) {
    throw InvalidArgument("sigma8 analysis: columns differ in length");
  }
  Sigma8Analysis a{subjects, sigma8, vaf_phi, vaf_phi_dot,
                   std::vector<bool>(n, false), std::nullopt, kNaN};
  std::vector<int> nonzero;
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    if (sigma8[i] > zero_tol) {
      nonzero.push_back(static_cast<int>(i));
      values.push_back(sigma8[i]);
    }
  }
  if (values.empty()) return a;
  const BoxSummary first = box_summary(values);
  std::vector<double> kept;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const bool outlier =
        std::find(first.outliers.begin(), first.outliers.end(),
                  static_cast<int>(k)) != first.outliers.end();
    if (outlier) continue;
    a.retained[nonzero[k]] = true;
    kept.push_back(values[k]);
  }
  a.box = box_summary(kept);
  a.median = a.box->median;
  return a;
}

const ReportRow& ComparisonReport::row(const std::string& subject,
                                       ModelKind model,
                                       const std::string& split) const {
  for (const auto& r : rows) {
    if (r.subject == subject && r.model == model && r.split == split) return r;
  }
  throw InvalidArgument("report: no row for " + subject + "/" +
                        model_name(model) + "/" + split);
}

void finalize_report(ComparisonReport& report) {
  report.averages.clear();
  report.anova.clear();
  report.sigma8.reset();
  report.warnings.clear();

  for (ModelKind m : report.models) {
    for (const char* split : kSplits) {
      ReportRow avg;
      avg.subject = "average";
      avg.model = m;
      avg.split = split;
      double* fields[] = {&avg.vaf.mean_phi, &avg.vaf.mean_phi_dot,
                          &avg.vaf.var_phi, &avg.vaf.j_isoc};
      for (double* f : fields) *f = 0.0;
      int counts[4] = {0, 0, 0, 0};
      for (const auto& r : report.rows) {
        if (r.model != m || r.split != split) continue;
        const double vals[] = {r.vaf.mean_phi, r.vaf.mean_phi_dot,
                               r.vaf.var_phi, r.vaf.j_isoc};
        for (int k = 0; k < 4; ++k) {
          if (!std::isfinite(vals[k])) continue;
          *fields[k] += vals[k];
          ++counts[k];
        }
      }
      for (int k = 0; k < 4; ++k) {
        *fields[k] = counts[k] > 0 ? *fields[k] / counts[k] : kNaN;
      }
      report.averages.push_back(avg);
    }
  }

  for (const char* split : kSplits) {
    for (const char* signal : kSignals) {
      AnovaRow a;
      a.split = split;
      a.signal = signal;
      std::vector<std::vector<double>> groups;
      for (ModelKind m : report.models) {
        std::vector<double> g;
        for (const auto& r : report.rows) {
          if (r.model != m || r.split != split) continue;
          const double v = signal_value(r.vaf, signal);
          if (std::isfinite(v)) g.push_back(v);
        }
        groups.push_back(std::move(g));
      }
      const bool enough =
          groups.size() >= 2 &&
          std::all_of(groups.begin(), groups.end(),
                      [](const auto& g) { return g.size() >= 2; });
      if (!enough) {
        a.note = "needs two models with two subjects each";
      } else {
        try {
          a.result = one_way_anova(groups);
        } catch (const InvalidArgument& e) {
          a.note = e.what();
        }
      }
      report.anova.push_back(std::move(a));
    }
  }

  std::vector<std::string> subjects;
  for (const auto& r : report.rows) {
    if (std::find(subjects.begin(), subjects.end(), r.subject) == subjects.end()) {
      subjects.push_back(r.subject);
    }
  }
  const bool has_lqs = std::find(report.models.begin(), report.models.end(),
                                 ModelKind::kLqs) != report.models.end();
  if (has_lqs && subjects.size() >= 3) {
    std::vector<double> s8, vp, vv;
    for (const auto& s : subjects) {
      const ReportRow& r = report.row(s, ModelKind::kLqs, "validation");
      s8.push_back(r.params.sigma(7));
      vp.push_back(r.vaf.mean_phi);
      vv.push_back(r.vaf.mean_phi_dot);
    }
    report.sigma8 =
        sigma8_analysis(subjects, s8, vp, vv, report.sigma8_zero_tol);
  } else if (has_lqs) {
    report.warnings.push_back("sigma8 summary skipped: needs three subjects");
  }

  for (const auto& r : report.rows) {
    if (r.split != "validation" || !(r.vaf.var_phi < 0.0)) continue;
    report.warnings.push_back(
        r.subject + " " + model_label(r.model) + ": validation VAF of var(phi) is " +
        format_double(r.vaf.var_phi) +
        " < 0; the variance fit on training data does not carry over and is "
        "likely overfitted");
  }
}

ComparisonReport run_comparison(const std::vector<SubjectEnsembles>& subjects,
                                const CompareConfig& cfg,
                                const std::vector<ModelKind>& models) {
  cfg.validate();
  if (subjects.empty()) throw InvalidArgument("compare: no subjects");
  if (models.empty()) throw InvalidArgument("compare: no models");
  ModelKind last = ModelKind::kLq;
  for (ModelKind m : models) last = std::max(last, m);

  const int jobs = resolve_jobs(cfg.jobs);
  const int count = static_cast<int>(subjects.size());
  const int outer = std::min(jobs, count);
  const int inner = std::max(1, jobs / outer);
  std::vector<std::vector<ModelFit>> fits(count);
  parallel_for(count, outer, [&](int i) {
    fits[i] = identify_chain(subjects[i], cfg, last, inner);
  });

  ComparisonReport report;
  for (ModelKind m : kChain) {
    if (std::find(models.begin(), models.end(), m) != models.end()) {
      report.models.push_back(m);
    }
  }
  for (int i = 0; i < count; ++i) {
    const SubjectEnsembles& s = subjects[i];
    Trajectories tt{s.subject_id, "train", s.train.moments, {}};
    Trajectories tv{s.subject_id, "validation", s.validation.moments, {}};
    for (const ModelFit& f : fits[i]) {
      if (std::find(report.models.begin(), report.models.end(), f.kind) ==
          report.models.end()) {
        continue;
      }
      report.rows.push_back({s.subject_id, f.kind, "train", f.train.vaf,
                             f.result.params});
      report.rows.push_back({s.subject_id, f.kind, "validation",
                             f.validation.vaf, f.result.params});
      tt.predicted.emplace_back(f.kind, f.train.predicted);
      tv.predicted.emplace_back(f.kind, f.validation.predicted);
      report.fits.emplace_back(s.subject_id + "/" + model_name(f.kind), f.result);
    }
    report.trajectories.push_back(std::move(tt));
    report.trajectories.push_back(std::move(tv));
  }
  report.sigma8_zero_tol = cfg.sigma8_zero_tol;
  finalize_report(report);
  return report;
}

void write_report(const std::filesystem::path& dir,
                  const ComparisonReport& report) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["schema_version"] = 1;
  j["sigma8_zero_tol"] = report.sigma8_zero_tol;
  j["anova_design"] =
      "one-way fixed-effects ANOVA; factor: model type; observations: one "
      "VAF per subject";
  nlohmann::json models = nlohmann::json::array();
  for (ModelKind m : report.models) models.push_back(model_name(m));
  j["models"] = models;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) j["rows"].push_back(row_json(r, true));
  j["averages"] = nlohmann::json::array();
  for (const auto& r : report.averages) j["averages"].push_back(row_json(r, false));
  j["anova"] = nlohmann::json::array();
  for (const auto& a : report.anova) {
    nlohmann::json e = {{"split", a.split}, {"signal", a.signal}};
    if (a.result) {
      e["F"] = a.result->F;
      e["p"] = a.result->p;
      e["ssb"] = a.result->ssb;
      e["ssw"] = a.result->ssw;
      e["df_between"] = a.result->df_between;
      e["df_within"] = a.result->df_within;
    }
    if (!a.note.empty()) e["note"] = a.note;
    j["anova"].push_back(e);
  }
  if (report.sigma8) {
    const Sigma8Analysis& s = *report.sigma8;
    nlohmann::json e = {{"subjects", s.subjects},
                        {"sigma8", s.sigma8},
                        {"vaf_mean_phi", s.vaf_phi},
                        {"vaf_mean_phi_dot", s.vaf_phi_dot},
                        {"retained", s.retained}};
    if (s.box) {
      e["median"] = s.box->median;
      e["q1"] = s.box->q1;
      e["q3"] = s.box->q3;
      e["whisker_lo"] = s.box->whisker_lo;
      e["whisker_hi"] = s.box->whisker_hi;
    }
    j["sigma8"] = e;
  }
  j["warnings"] = report.warnings;

  j["trajectories"] = nlohmann::json::array();
  for (const auto& t : report.trajectories) {
    CsvTable table;
    table.header = {"t", "meas_phi", "meas_phi_dot", "meas_var_phi"};
    for (const auto& [m, _] : t.predicted) {
      const std::string p = model_name(m);
      table.header.insert(table.header.end(),
                          {p + "_phi", p + "_phi_dot", p + "_var_phi"});
    }
    for (int k = 0; k < t.measured.size(); ++k) {
      std::vector<double> row = {static_cast<double>(k), t.measured.mean[k](0),
                                 t.measured.mean[k](1), t.measured.cov[k](0, 0)};
      for (const auto& [_, pm] : t.predicted) {
        row.insert(row.end(), {pm.mean[k](0), pm.mean[k](1), pm.cov[k](0, 0)});
      }
      table.rows.push_back(std::move(row));
    }
    write_csv(dir / trajectory_file(t), table);
    j["trajectories"].push_back(
        {{"subject", t.subject}, {"split", t.split}, {"file", trajectory_file(t)}});
  }

  j["fits"] = nlohmann::json::array();
  if (!report.fits.empty()) std::filesystem::create_directories(dir / "fits");
  for (const auto& [key, result] : report.fits) {
    std::string stem = key;
    std::replace(stem.begin(), stem.end(), '/', '_');
    write_json(dir / "fits" / (stem + ".json"), result);
    std::ofstream trace(dir / "fits" / (stem + "_trace.csv"));
    write_trace_csv(trace, result.trace);
    j["fits"].push_back({{"key", key}, {"file", "fits/" + stem + ".json"}});
  }
  write_json(dir / "report.json", j);
}

ComparisonReport read_report(const std::filesystem::path& dir) {
  const nlohmann::json j = read_json(dir / "report.json");
  if (j.value("schema_version", 0) != 1) {
    throw InvalidArgument("report: unsupported schema_version");
  }
  ComparisonReport report;
  for (const auto& m : j.at("models")) {
    report.models.push_back(parse_model_kind(m.get<std::string>()));
  }
  for (const auto& r : j.at("rows")) report.rows.push_back(row_from_json(r));
  for (const auto& t : j.at("trajectories")) {
    Trajectories tr;
    tr.subject = t.at("subject").get<std::string>();
    tr.split = t.at("split").get<std::string>();
    const CsvTable table = read_csv(dir / t.at("file").get<std::string>());
    const auto column = [&](const std::string& name) {
      return table.column_values(name);
    };
    const auto fill = [&](const std::string& prefix) {
      const auto a = column(prefix + "_phi");
      const auto b = column(prefix + "_phi_dot");
      const auto v = column(prefix + "_var_phi");
      ObservedMoments om;
      for (std::size_t k = 0; k < a.size(); ++k) {
        om.mean.push_back(Eigen::Vector2d(a[k], b[k]));
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2);
        c(0, 0) = v[k];
        om.cov.push_back(c);
      }
      return om;
    };
    tr.measured = fill("meas");
    for (ModelKind m : report.models) {
      tr.predicted.emplace_back(m, fill(model_name(m)));
    }
    report.trajectories.push_back(std::move(tr));
  }
  // Averages, ANOVA and the sigma8 summary follow from the rows.
  report.sigma8_zero_tol = j.value("sigma8_zero_tol", report.sigma8_zero_tol);
  finalize_report(report);
  return report;
}

void render_report(const std::filesystem::path& dir,
                   const ComparisonReport& report) {
  std::filesystem::create_directories(dir / "plots");

  CsvTable table;
  table.header = {"subject", "model", "split", "vaf_mean_phi",
                  "vaf_mean_phi_dot", "vaf_var_phi", "j_isoc"};
  for (int i = 1; i <= ParamVectors::kCostSize; ++i) {
    table.header.push_back("s" + std::to_string(i));
  }
  for (int i = 1; i <= ParamVectors::kNoiseSize; ++i) {
    table.header.push_back("sigma" + std::to_string(i));
  }
  std::ostringstream vaf;
  vaf << "subject,model,split,vaf_mean_phi,vaf_mean_phi_dot,vaf_var_phi,j_isoc";
  for (std::size_t k = 7; k < table.header.size(); ++k) vaf << ',' << table.header[k];
  vaf << '\n';
  const auto put_row = [&](std::ostringstream& os, const ReportRow& r,
                           bool params) {
    os << r.subject << ',' << model_label(r.model) << ',' << r.split << ','
       << format_double(r.vaf.mean_phi) << ',' << format_double(r.vaf.mean_phi_dot)
       << ',' << format_double(r.vaf.var_phi) << ',' << format_double(r.vaf.j_isoc);
    if (params) {
      for (int i = 0; i < r.params.s.size(); ++i) os << ',' << format_double(r.params.s(i));
      for (int i = 0; i < r.params.sigma.size(); ++i) {
        os << ',' << format_double(r.params.sigma(i));
      }
    }
    os << '\n';
  };
  for (const auto& r : report.rows) put_row(vaf, r, true);
  write_text(dir / "vaf_table.csv", vaf.str());

  std::ostringstream avg;
  avg << "subject,model,split,vaf_mean_phi,vaf_mean_phi_dot,vaf_var_phi,j_isoc\n";
  for (const auto& r : report.averages) put_row(avg, r, false);
  write_text(dir / "averages.csv", avg.str());

  std::ostringstream an;
  an << "split,signal,F,p,ssb,ssw,df_between,df_within,note\n";
  for (const auto& a : report.anova) {
    an << a.split << ',' << a.signal << ',';
    if (a.result) {
      an << format_double(a.result->F) << ',' << format_double(a.result->p) << ','
         << format_double(a.result->ssb) << ',' << format_double(a.result->ssw)
         << ',' << a.result->df_between << ',' << a.result->df_within << ',';
    } else {
      an << ",,,,,,";
    }
    an << '"' << a.note << "\"\n";
  }
  write_text(dir / "anova.csv", an.str());

  if (report.sigma8) {
    const Sigma8Analysis& s = *report.sigma8;
    std::ostringstream os;
    os << "subject,sigma8,vaf_mean_phi,vaf_mean_phi_dot,retained\n";
    for (std::size_t i = 0; i < s.sigma8.size(); ++i) {
      os << s.subjects[i] << ',' << format_double(s.sigma8[i]) << ','
         << format_double(s.vaf_phi[i]) << ',' << format_double(s.vaf_phi_dot[i])
         << ',' << (s.retained[i] ? 1 : 0) << '\n';
    }
    write_text(dir / "sigma8.csv", os.str());

    svg::Series phi{"VAF E[phi]", {}, {}, false, true};
    svg::Series phid{"VAF E[phi_dot]", {}, {}, false, true};
    for (std::size_t i = 0; i < s.sigma8.size(); ++i) {
      if (!s.retained[i]) continue;
      phi.x.push_back(s.sigma8[i]);
      phi.y.push_back(s.vaf_phi[i]);
      phid.x.push_back(s.sigma8[i]);
      phid.y.push_back(s.vaf_phi_dot[i]);
    }
    write_text(dir / "plots" / "sigma8.svg",
               svg::scatter_box("Validation VAF over sigma8", "sigma8", "VAF",
                                {phi, phid}, s.box));
  }

  std::vector<svg::BarGroup> bars;
  for (ModelKind m : report.models) {
    for (const auto& r : report.averages) {
      if (r.model != m || r.split != "validation") continue;
      bars.push_back({model_label(m),
                      {r.vaf.mean_phi, r.vaf.mean_phi_dot, r.vaf.var_phi}});
    }
  }
  write_text(dir / "plots" / "vaf_validation.svg",
             svg::bar_chart("Average validation VAF", "VAF",
                            {"E[phi]", "E[phi_dot]", "var(phi)"}, bars));

  for (const auto& t : report.trajectories) {
    std::vector<svg::Panel> panels(3);
    const char* titles[] = {"E[phi]", "E[phi_dot]", "var(phi)"};
    const char* units[] = {"rad", "rad/s", "rad^2"};
    for (int p = 0; p < 3; ++p) {
      panels[p].title = t.subject + " " + t.split + ": " + titles[p];
      panels[p].xlabel = "t [s]";
      panels[p].ylabel = units[p];
    }
    const auto add = [&](const std::string& label, const ObservedMoments& om,
                         bool dashed) {
      svg::Series s[3];
      for (int k = 0; k < om.size(); ++k) {
        const double time = 0.01 * k;
        const double v[] = {om.mean[k](0), om.mean[k](1), om.cov[k](0, 0)};
        for (int p = 0; p < 3; ++p) {
          s[p].x.push_back(time);
          s[p].y.push_back(v[p]);
        }
      }
      for (int p = 0; p < 3; ++p) {
        s[p].label = label;
        s[p].dashed = dashed;
        panels[p].series.push_back(std::move(s[p]));
      }
    };
    add("measured", t.measured, false);
    for (const auto& [m, om] : t.predicted) add(model_label(m), om, true);
    write_text(dir / "plots" /
                   ("traj_" + t.subject + "_" + t.split + ".svg"),
               svg::line_figure(panels));
  }
}

void to_json(nlohmann::json& j, const CompareConfig& c) {
  j = nlohmann::json{{"driving", c.driving},
                     {"isoc", c.isoc},
                     {"weights",
                      {{"lq", {{"cost", c.lq.cost}}},
                       {"lqg", {{"cost", c.lqg.cost}, {"noise", c.lqg.noise}}},
                       {"lqs", {{"cost", c.lqs.cost}, {"noise", c.lqs.noise}}}}},
                     {"sigma8_zero_tol", c.sigma8_zero_tol}};
}

void from_json(const nlohmann::json& j, CompareConfig& c) {
  c = CompareConfig();
  if (j.contains("driving")) c.driving = j.at("driving").get<DrivingParams>();
  if (j.contains("isoc")) c.isoc = j.at("isoc").get<IsocConfig>();
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    const auto read = [&](const char* key, ModelWeights& mw) {
      if (!w.contains(key)) return;
      const auto& e = w.at(key);
      if (e.contains("cost")) mw.cost = e.at("cost").get<VafWeights>();
      if (e.contains("noise")) mw.noise = e.at("noise").get<VafWeights>();
    };
    read("lq", c.lq);
    read("lqg", c.lqg);
    read("lqs", c.lqs);
    if (w.contains("lq") && !w.at("lq").contains("noise")) c.lq.noise = c.lq.cost;
  }
  c.sigma8_zero_tol = j.value("sigma8_zero_tol", c.sigma8_zero_tol);
  c.validate();
}

void to_json(nlohmann::json& j, const SignalVafs& v) {
  const auto value = [](double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  j = nlohmann::json{{"mean_phi", value(v.mean_phi)},
                     {"mean_phi_dot", value(v.mean_phi_dot)},
                     {"var_phi", value(v.var_phi)},
                     {"j_isoc", value(v.j_isoc)}};
}

void from_json(const nlohmann::json& j, SignalVafs& v) {
  v.mean_phi = json_number(j, "mean_phi");
  v.mean_phi_dot = json_number(j, "mean_phi_dot");
  v.var_phi = json_number(j, "var_phi");
  v.j_isoc = json_number(j, "j_isoc");
}

}  // namespace lqsid
