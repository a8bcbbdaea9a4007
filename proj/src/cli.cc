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

#include "lqsid/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"
#include "lqsid/montecarlo.hpp"
#include "lqsid/parallel.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {
namespace {

namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) {
    throw InvalidArgument(what + " not found: " + p.string());
  }
}

Eigen::Vector2d pair_from_json(const nlohmann::json& j, const char* key) {
  const Eigen::VectorXd v = vector_from_json(j);
  if (v.size() != 2) throw InvalidArgument(std::string(key) + " needs two entries");
  return v;
}

SimulateConfig simulate_from_json(const nlohmann::json& j) {
  SimulateConfig s;
  s.params.s(3) = 1.0;
  s.kind = j.value("kind", s.kind);
  if (s.kind != "rollout" && s.kind != "sessions") {
    throw InvalidArgument("simulate.kind must be \"rollout\" or \"sessions\"");
  }
  if (j.contains("params")) s.params = j.at("params").get<ParamVectors>();
  s.trials = j.value("trials", s.trials);
  s.N = j.value("N", s.N);
  if (j.contains("x0_mean")) s.x0_mean = pair_from_json(j.at("x0_mean"), "x0_mean");
  if (j.contains("x0_var")) s.x0_var = pair_from_json(j.at("x0_var"), "x0_var");
  if (j.contains("sessions")) {
    s.sessions = j.at("sessions").get<SyntheticSessionConfig>();
  } else {
    s.sessions.params = s.params;
  }
  s.subjects = j.value("subjects", s.subjects);
  if (j.contains("subject_params")) {
    for (const auto& p : j.at("subject_params")) {
      s.subject_params.push_back(p.get<ParamVectors>());
    }
  }
  if (s.trials < 1) throw InvalidArgument("simulate.trials must be >= 1");
  if (s.N < 1) throw InvalidArgument("simulate.N must be >= 1");
  if (s.subjects < 1) throw InvalidArgument("simulate.subjects must be >= 1");
  if ((s.x0_var.array() < 0.0).any()) {
    throw InvalidArgument("simulate.x0_var must be >= 0");
  }
  s.params.validate();
  return s;
}

struct IndexEntry {
  std::string id;
  fs::path train;
  fs::path validation;
};

std::vector<IndexEntry> read_index(const fs::path& index) {
  require_file(index, "ensemble index");
  const nlohmann::json j = read_json(index);
  if (j.value("schema_version", 0) != 1) {
    throw InvalidArgument("ensemble index: unsupported schema_version");
  }
  std::vector<IndexEntry> out;
  for (const auto& s : j.at("subjects")) {
    IndexEntry e{s.at("id").get<std::string>(),
                 resolve(index.parent_path(), s.at("train").get<std::string>()),
                 resolve(index.parent_path(), s.at("validation").get<std::string>())};
    require_file(e.train, "ensemble file");
    require_file(e.validation, "ensemble file");
    out.push_back(std::move(e));
  }
  if (out.empty()) throw InvalidArgument("ensemble index lists no subjects");
  return out;
}

std::string fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void print_report_summary(const ComparisonReport& report, std::ostream& log) {
  log << "average VAF (validation):\n";
  for (const auto& r : report.averages) {
    if (r.split != "validation") continue;
    log << "  " << model_label(r.model) << "  E[phi] " << fixed(r.vaf.mean_phi)
        << "  E[phi_dot] " << fixed(r.vaf.mean_phi_dot) << "  var(phi) "
        << fixed(r.vaf.var_phi) << '\n';
  }
  for (const auto& a : report.anova) {
    if (a.split != "validation" || a.signal == "var_phi") continue;
    log << "  ANOVA " << a.signal << ": ";
    if (a.result) {
      log << "F = " << format_double(a.result->F)
          << ", p = " << format_double(a.result->p) << '\n';
    } else {
      log << a.note << '\n';
    }
  }
  if (report.sigma8 && report.sigma8->box) {
    log << "  sigma8 median " << fixed(report.sigma8->median) << '\n';
  }
  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
}

}  // namespace

fs::path RunConfig::ensemble_index() const {
  return ensembles.empty() ? out / "ensembles" / "index.json" : ensembles;
}

RunConfig load_run_config(const fs::path& path) {
  require_file(path, "config");
  const nlohmann::json j = read_json(path);
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  if (!j.contains("schema_version")) {
    throw InvalidArgument("config: schema_version missing");
  }
  if (j.at("schema_version").get<int>() != kRunConfigSchema) {
    throw InvalidArgument("config: unsupported schema_version " +
                          j.at("schema_version").dump());
  }
  const fs::path base = path.parent_path();
  RunConfig c;
  try {
    if (j.contains("manifest")) {
      c.manifest = resolve(base, j.at("manifest").get<std::string>());
    }
    if (j.contains("ensembles")) {
      c.ensembles = resolve(base, j.at("ensembles").get<std::string>());
    }
    c.out = resolve(base, j.value("out", std::string("out")));
    if (j.contains("model")) c.model = parse_model_kind(j.at("model").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("pipeline")) c.pipeline = j.at("pipeline").get<PipelineConfig>();
    c.compare = j.get<CompareConfig>();
    if (j.contains("simulate")) c.simulate = simulate_from_json(j.at("simulate"));
    else c.simulate = simulate_from_json(nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  if (c.jobs < 0) throw InvalidArgument("config: jobs must be >= 0");
  c.compare.driving.dt = c.pipeline.dt;
  c.compare.validate();
  return c;
}

void cmd_prep(const RunConfig& cfg, std::ostream& log) {
  if (cfg.manifest.empty()) throw InvalidArgument("prep: no manifest configured");
  require_file(cfg.manifest, "manifest");
  const nlohmann::json manifest = read_json(cfg.manifest);
  if (!manifest.contains("subjects") || !manifest.at("subjects").is_array() ||
      manifest.at("subjects").empty()) {
    throw InvalidArgument("prep: manifest lists no subjects");
  }
  struct Job {
    std::string id;
    std::vector<fs::path> files;
  };
  std::vector<Job> jobs;
  for (const auto& s : manifest.at("subjects")) {
    Job job{s.at("id").get<std::string>(), {}};
    for (const auto& f : s.at("sessions")) {
      job.files.push_back(resolve(cfg.manifest.parent_path(), f.get<std::string>()));
      require_file(job.files.back(), "session file");
    }
    if (job.files.empty()) throw InvalidArgument("prep: subject " + job.id + " has no sessions");
    jobs.push_back(std::move(job));
  }

  const fs::path dir = cfg.ensemble_index().parent_path();
  fs::create_directories(dir);
  const int count = static_cast<int>(jobs.size());
  std::vector<nlohmann::json> summaries(count);
  std::vector<std::string> errors(count);
  parallel_for(count, cfg.jobs, [&](int i) {
    try {
      std::vector<RawSession> sessions;
      for (const auto& f : jobs[i].files) {
        sessions.push_back(read_session_csv(f, jobs[i].id));
      }
      const SubjectEnsembles se = split_train_validation(sessions, cfg.pipeline);
      write_ensemble(dir, jobs[i].id + "_train", se.train);
      write_ensemble(dir, jobs[i].id + "_validation", se.validation);
      summaries[i] = {{"id", jobs[i].id},
                      {"train", ensemble_summary(se.train)},
                      {"validation", ensemble_summary(se.validation)}};
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  nlohmann::json index = {{"schema_version", 1}, {"subjects", nlohmann::json::array()}};
  nlohmann::json report = {{"schema_version", 1},
                           {"pipeline", cfg.pipeline},
                           {"subjects", nlohmann::json::array()},
                           {"failed", nlohmann::json::array()}};
  for (int i = 0; i < count; ++i) {
    if (!errors[i].empty()) {
      report["failed"].push_back({{"id", jobs[i].id}, {"error", errors[i]}});
      log << "prep: " << jobs[i].id << " failed: " << errors[i] << '\n';
      continue;
    }
    index["subjects"].push_back({{"id", jobs[i].id},
                                 {"train", jobs[i].id + "_train.json"},
                                 {"validation", jobs[i].id + "_validation.json"}});
    report["subjects"].push_back(summaries[i]);
    const auto& tr = summaries[i].at("train");
    const auto& va = summaries[i].at("validation");
    log << "prep: " << jobs[i].id << "  train N=" << tr.at("N") << " trials="
        << tr.at("retained") << " dropped=" << tr.at("dropped")
        << "  validation N=" << va.at("N") << " trials=" << va.at("retained")
        << " dropped=" << va.at("dropped") << '\n';
  }
  write_json(cfg.ensemble_index(), index);
  write_json(cfg.out / "prep_report.json", report);
  if (!report["failed"].empty()) {
    throw NumericalError("prep: " + std::to_string(report["failed"].size()) +
                         " subject(s) could not be processed");
  }
}

std::vector<SubjectEnsembles> load_ensembles(const fs::path& index) {
  std::vector<SubjectEnsembles> out;
  for (const auto& e : read_index(index)) {
    SubjectEnsembles s;
    s.subject_id = e.id;
    s.train = read_ensemble(e.train);
    s.validation = read_ensemble(e.validation);
    out.push_back(std::move(s));
  }
  return out;
}

void cmd_identify(const RunConfig& cfg, std::ostream& log) {
  if (cfg.model == ModelKind::kLq && (cfg.compare.lq.cost.has_covariance_weight() ||
                                      cfg.compare.lq.noise.has_covariance_weight())) {
    throw InvalidArgument("identify: the LQ model needs w_v = 0");
  }
  const std::vector<SubjectEnsembles> subjects = load_ensembles(cfg.ensemble_index());
  const fs::path dir = cfg.out / "identify" / model_name(cfg.model);
  fs::create_directories(dir);
  CompareConfig cc = cfg.compare;
  cc.seed = cfg.seed;

  const int count = static_cast<int>(subjects.size());
  const int jobs = resolve_jobs(cfg.jobs);
  const int outer = std::min(jobs, count);
  std::vector<std::vector<ModelFit>> fits(count);
  parallel_for(count, outer, [&](int i) {
    fits[i] = identify_chain(subjects[i], cc, cfg.model, std::max(1, jobs / outer));
  });
  for (int i = 0; i < count; ++i) {
    const ModelFit& f = fits[i].back();
    nlohmann::json chain = nlohmann::json::array();
    for (const auto& g : fits[i]) {
      chain.push_back({{"model", model_name(g.kind)}, {"params", g.result.params}});
    }
    const std::string& id = subjects[i].subject_id;
    write_json(dir / (id + ".json"), {{"schema_version", 1},
                                      {"subject", id},
                                      {"model", model_name(f.kind)},
                                      {"seed", cfg.seed},
                                      {"result", f.result},
                                      {"train", f.train.vaf},
                                      {"validation", f.validation.vaf},
                                      {"chain", chain}});
    std::ofstream trace(dir / (id + "_trace.csv"));
    write_trace_csv(trace, f.result.trace);
    log << "identify: " << id << " " << model_label(f.kind) << "  J_ISOC "
        << fixed(f.result.j_isoc) << "  validation E[phi] "
        << fixed(f.validation.vaf.mean_phi) << " E[phi_dot] "
        << fixed(f.validation.vaf.mean_phi_dot) << " var(phi) "
        << fixed(f.validation.vaf.var_phi) << "  sigma8 "
        << fixed(f.result.params.sigma(7)) << '\n';
  }
}

void cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  const SimulateConfig& s = cfg.simulate;
  const fs::path dir = cfg.out / "simulate";
  if (s.kind == "sessions") {
    const fs::path manifest = write_synthetic_cohort(
        dir, s.sessions, s.subjects, cfg.seed, s.subject_params);
    log << "simulate: wrote " << s.subjects << " subject(s), manifest "
        << manifest.string() << '\n';
    return;
  }
  DrivingParams p = cfg.compare.driving;
  p.N = s.N;
  LqsProblem prob = build_driving_problem(p, s.params);
  set_driving_initial_state(prob, p, s.x0_mean, s.x0_var.asDiagonal().toDenseMatrix());
  if (cfg.model == ModelKind::kLqg) prob = reduce_to_lqg(prob);
  if (cfg.model == ModelKind::kLq) prob = reduce_to_lq(prob);
  const GainSchedule gains = synthesize(prob, cfg.compare.isoc.solver);
  const RolloutBatch batch = rollout(prob, gains, s.trials, cfg.seed, cfg.jobs);
  const Eigen::MatrixXd M = leading_selection(2, kDrivingStates);
  fs::create_directories(dir);
  write_rollouts(dir, batch, prob, M, p.dt);

  const ObservedMoments model = observed_moments(propagate(prob, gains), M);
  const ObservedMoments sample = sample_moments(batch, M);
  CsvTable table;
  table.header = {"t", "model_phi", "model_phi_dot", "model_var_phi",
                  "model_var_phi_dot", "sample_phi", "sample_phi_dot",
                  "sample_var_phi", "sample_var_phi_dot"};
  for (int t = 0; t <= s.N; ++t) {
    table.rows.push_back({t * p.dt, model.mean[t](0), model.mean[t](1),
                          model.cov[t](0, 0), model.cov[t](1, 1),
                          sample.mean[t](0), sample.mean[t](1),
                          sample.cov[t](0, 0), sample.cov[t](1, 1)});
  }
  write_csv(dir / "moments.csv", table);
  log << "simulate: " << s.trials << " " << model_label(cfg.model)
      << " rollouts of " << s.N << " steps in " << dir.string() << '\n';
}

void cmd_compare(const RunConfig& cfg, std::ostream& log) {
  const std::vector<SubjectEnsembles> subjects = load_ensembles(cfg.ensemble_index());
  CompareConfig cc = cfg.compare;
  cc.seed = cfg.seed;
  cc.jobs = cfg.jobs;
  const ComparisonReport report = run_comparison(subjects, cc);
  const fs::path dir = cfg.out / "compare";
  write_report(dir, report);
  render_report(dir, report);
  log << "compare: " << subjects.size() << " subject(s), report in "
      << dir.string() << '\n';
  print_report_summary(report, log);
}

void cmd_report(const RunConfig& cfg, std::ostream& log) {
  const fs::path dir = cfg.out / "compare";
  require_file(dir / "report.json", "comparison report");
  const ComparisonReport report = read_report(dir);
  render_report(dir, report);
  log << "report: tables and plots in " << dir.string() << '\n';
  print_report_summary(report, log);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Inverse stochastic optimal control for steering movements"};
  app.require_subcommand(1);
  struct Flags {
    std::string config;
    std::optional<std::string> model;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> jobs;
  } flags;
  const std::pair<const char*, const char*> commands[] = {
      {"prep", "Segment raw sessions into training and validation ensembles"},
      {"identify", "Identify cost and noise parameters of one model per subject"},
      {"simulate", "Sample closed-loop rollouts or synthetic raw sessions"},
      {"compare", "Identify and evaluate LQ, LQG and LQS on every subject"},
      {"report", "Re-render tables and plots of a comparison"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "Run configuration (JSON)")->required();
    sub->add_option("--model", flags.model, "lq, lqg or lqs");
    sub->add_option("--seed", flags.seed, "Random seed");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--jobs", flags.jobs, "Worker threads (0: all cores)");
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig cfg = load_run_config(flags.config);
    if (flags.model) cfg.model = parse_model_kind(*flags.model);
    if (flags.seed) cfg.seed = *flags.seed;
    if (flags.out) cfg.out = *flags.out;
    if (flags.jobs) {
      if (*flags.jobs < 0) throw InvalidArgument("--jobs must be >= 0");
      cfg.jobs = *flags.jobs;
    }
    fs::create_directories(cfg.out);
    if (command == "prep") cmd_prep(cfg, out);
    else if (command == "identify") cmd_identify(cfg, out);
    else if (command == "simulate") cmd_simulate(cfg, out);
    else if (command == "compare") cmd_compare(cfg, out);
    else cmd_report(cfg, out);
  } catch (const InvalidArgument& e) {
    err << "lqsid " << command << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "lqsid " << command << ": malformed JSON: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "lqsid " << command << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "lqsid " << command << ": " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "lqsid " << command << ": " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace lqsid
