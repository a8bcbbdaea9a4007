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

#include "lqsid/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"
#include "lqsid/spline.hpp"

namespace lqsid {
namespace {

constexpr double kZeroReference = 1e-9;

struct Step {
  int plateau_begin;  // first sample of the preceding zero plateau
  int index;          // first sample of the new reference
  int plateau_end;    // one past the last sample of the target plateau
  double target;
};

std::vector<Step> find_steps(const std::vector<double>& ref, int sign) {
  const int n = static_cast<int>(ref.size());
  std::vector<int> changes{0};
  for (int k = 1; k < n; ++k) {
    if (ref[k] != ref[k - 1]) changes.push_back(k);
  }
  changes.push_back(n);
  std::vector<Step> steps;
  for (std::size_t c = 1; c + 1 < changes.size(); ++c) {
    const int k = changes[c];
    if (std::abs(ref[k - 1]) > kZeroReference) continue;
    if (ref[k] * sign <= kZeroReference) continue;
    steps.push_back({changes[c - 1], k, changes[c + 1], ref[k]});
  }
  return steps;
}

Eigen::MatrixXd aligned(const Segment& s, int N) {
  if (s.angle.empty()) throw InvalidArgument("ensemble: empty segment");
  Eigen::MatrixXd out(N + 1, 2);
  const int len = static_cast<int>(s.angle.size());
  for (int t = 0; t <= N; ++t) {
    const int i = std::min(t, len - 1);
    out(t, 0) = s.angle[i];
    out(t, 1) = s.velocity[i];
  }
  return out;
}

nlohmann::json int_array(const std::vector<int>& v) { return nlohmann::json(v); }

}  // namespace

void RawSession::validate(double dt) const {
  const std::size_t n = time.size();
  if (angle.size() != n || reference.size() != n ||
      (!velocity.empty() && velocity.size() != n)) {
    throw InvalidArgument("session " + subject_id + ": column lengths differ");
  }
  if (n < 2) throw InvalidArgument("session " + subject_id + ": too short");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(time[i]) || !std::isfinite(angle[i]) ||
        !std::isfinite(reference[i])) {
      throw InvalidArgument("session " + subject_id + ": non-finite sample");
    }
    if (i > 0 && std::abs(time[i] - time[i - 1] - dt) > 1e-6) {
      throw InvalidArgument("session " + subject_id +
                            ": sampling is not uniform at dt");
    }
  }
}

RawSession read_session_csv(const std::filesystem::path& path,
                            const std::string& subject_id) {
  const CsvTable t = read_csv(path);
  RawSession s;
  s.subject_id = subject_id;
  s.time = t.column_values("time_s");
  s.angle = t.column_values("angle_rad");
  s.reference = t.column_values("reference_rad");
  return s;
}

void write_session_csv(const std::filesystem::path& path,
                       const RawSession& session) {
  CsvTable t;
  t.header = {"time_s", "angle_rad", "reference_rad"};
  t.rows.reserve(session.time.size());
  for (int i = 0; i < session.size(); ++i) {
    t.rows.push_back({session.time[i], session.angle[i], session.reference[i]});
  }
  write_csv(path, t);
}

void PipelineConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidArgument("pipeline: dt must be > 0");
  if (!(angle_tol > 0.0)) throw InvalidArgument("pipeline: angle_tol must be > 0");
  if (!(start_velocity > 0.0 && velocity_step > 0.0 &&
        max_start_velocity >= start_velocity)) {
    throw InvalidArgument("pipeline: invalid start velocity thresholds");
  }
  if (!(end_velocity > 0.0)) throw InvalidArgument("pipeline: end_velocity <= 0");
  if (spline_alpha && !(*spline_alpha >= 0.0)) {
    throw InvalidArgument("pipeline: spline_alpha must be >= 0");
  }
}

RawSession smooth_and_differentiate(const RawSession& session,
                                    std::optional<double> alpha) {
  if (session.size() < 4) {
    throw InvalidArgument("smoothing needs at least four samples");
  }
  const SmoothingSpline sp =
      fit_smoothing_spline(session.time, session.angle, alpha);
  RawSession out = session;
  out.angle = sp.value;
  out.velocity = sp.slopes();
  return out;
}

SegmentationResult segment_movements(const RawSession& session, int step_sign,
                                     const PipelineConfig& cfg) {
  if (step_sign != 1 && step_sign != -1) {
    throw InvalidArgument("segmentation: step sign must be +1 or -1");
  }
  if (session.velocity.size() != session.time.size()) {
    throw InvalidArgument("segmentation: session has no velocity");
  }
  cfg.validate();
  const auto& phi = session.angle;
  const auto& vel = session.velocity;
  // Thresholds are generated from an integer count to avoid drift.
  const int relax_steps = static_cast<int>(std::floor(
      (cfg.max_start_velocity - cfg.start_velocity) / cfg.velocity_step + 1e-9));

  SegmentationResult out;
  for (const Step& st : find_steps(session.reference, step_sign)) {
    std::optional<int> start;
    double threshold = 0.0;
    for (int k = 0; k <= relax_steps && !start; ++k) {
      threshold = cfg.start_velocity + k * cfg.velocity_step;
      for (int i = st.index - 1; i >= st.plateau_begin; --i) {
        if (std::abs(phi[i]) <= cfg.angle_tol && std::abs(vel[i]) < threshold) {
          start = i;
          break;
        }
      }
    }
    if (!start) {
      out.dropped_steps.push_back(st.index);
      continue;
    }
    Segment seg;
    seg.step_index = st.index;
    seg.start = *start;
    seg.threshold = threshold;
    seg.target = st.target;
    for (int i = st.index; i < st.plateau_end; ++i) {
      if (std::abs(phi[i] - st.target) <= cfg.angle_tol &&
          std::abs(vel[i]) < cfg.end_velocity) {
        seg.end = i;
        break;
      }
    }
    seg.angle.assign(phi.begin() + seg.start, phi.begin() + st.plateau_end);
    seg.velocity.assign(vel.begin() + seg.start, vel.begin() + st.plateau_end);
    out.segments.push_back(std::move(seg));
  }
  return out;
}

int average_duration(const std::vector<int>& durations) {
  if (durations.empty()) {
    throw InvalidArgument("no repetition reached the target");
  }
  const double mean =
      std::accumulate(durations.begin(), durations.end(), 0.0) /
      static_cast<double>(durations.size());
  return static_cast<int>(std::lround(mean));
}

TrialEnsemble TrialEnsemble::negated() const {
  TrialEnsemble e = *this;
  e.sign = -sign;
  e.target = -target;
  for (auto& t : e.trials) t = -t;
  for (auto& m : e.moments.mean) m = -m;
  return e;
}

TrialEnsemble ensemble_moments(const std::vector<Segment>& segments, int N) {
  if (segments.size() < 2) {
    throw InvalidArgument("ensemble: need at least two repetitions");
  }
  if (N < 1) throw InvalidArgument("ensemble: horizon must be >= 1");
  TrialEnsemble e;
  e.N = N;
  e.target = segments.front().target;
  e.sign = e.target >= 0.0 ? 1 : -1;
  for (const auto& s : segments) {
    e.trials.push_back(aligned(s, N));
    if (s.duration()) e.durations.push_back(*s.duration());
    e.thresholds.push_back(s.threshold);
    e.starts.push_back(s.start);
    e.step_indices.push_back(s.step_index);
  }
  const double K = static_cast<double>(e.trials.size());
  for (int t = 0; t <= N; ++t) {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& tr : e.trials) mean += tr.row(t).transpose();
    mean /= K;
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& tr : e.trials) {
      const Eigen::Vector2d d = tr.row(t).transpose() - mean;
      cov += d * d.transpose();
    }
    cov /= K - 1.0;
    e.moments.mean.push_back(mean);
    e.moments.cov.push_back(cov);
  }
  return e;
}

KinematicFeatures kinematic_features(const std::vector<double>& speed) {
  KinematicFeatures f;
  const int n = static_cast<int>(speed.size());
  if (n < 2) return f;
  const double vmax = *std::max_element(speed.begin(), speed.end());
  for (int i = 1; i + 1 < n; ++i) {
    if (speed[i] > speed[i - 1] && speed[i] > speed[i + 1] &&
        speed[i] > 0.1 * vmax) {
      ++f.peaks;
    }
  }
  double area = 0.0;
  for (int i = 0; i + 1 < n; ++i) area += 0.5 * (speed[i] + speed[i + 1]);
  const double mean = area / (n - 1);
  f.max_to_mean = mean > 0.0 ? vmax / mean : 0.0;

  double mass = 0.0, m1 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = std::max(speed[i], 0.0);
    mass += w;
    m1 += w * i;
  }
  if (mass > 0.0) {
    const double mu = m1 / mass;
    double m2 = 0.0, m3 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double w = std::max(speed[i], 0.0);
      const double d = i - mu;
      m2 += w * d * d;
      m3 += w * d * d * d;
    }
    m2 /= mass;
    m3 /= mass;
    f.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  }
  return f;
}

KinematicFeatures kinematic_features(const TrialEnsemble& ensemble) {
  std::vector<double> speed;
  speed.reserve(ensemble.moments.mean.size());
  for (const auto& m : ensemble.moments.mean) speed.push_back(ensemble.sign * m(1));
  return kinematic_features(speed);
}

SubjectEnsembles split_train_validation(const std::vector<RawSession>& sessions,
                                        const PipelineConfig& cfg) {
  if (sessions.empty()) throw InvalidArgument("no sessions given");
  cfg.validate();
  std::vector<Segment> plus, minus;
  int dropped_plus = 0, dropped_minus = 0;
  for (const auto& raw : sessions) {
    raw.validate(cfg.dt);
    const RawSession s = smooth_and_differentiate(raw, cfg.spline_alpha);
    auto p = segment_movements(s, 1, cfg);
    auto m = segment_movements(s, -1, cfg);
    dropped_plus += static_cast<int>(p.dropped_steps.size());
    dropped_minus += static_cast<int>(m.dropped_steps.size());
    for (auto& seg : p.segments) plus.push_back(std::move(seg));
    for (auto& seg : m.segments) minus.push_back(std::move(seg));
  }
  const std::string& id = sessions.front().subject_id;
  if (plus.empty() || minus.empty()) {
    throw InvalidArgument("subject " + id + ": both step signs are required");
  }
  auto build = [&](const std::vector<Segment>& segs, int dropped) {
    std::vector<int> durations;
    for (const auto& s : segs) {
      if (s.duration()) durations.push_back(*s.duration());
    }
    TrialEnsemble e = ensemble_moments(segs, average_duration(durations));
    e.subject_id = id;
    e.dt = cfg.dt;
    e.dropped = dropped;
    return e;
  };
  SubjectEnsembles out;
  out.subject_id = id;
  out.train = build(plus, dropped_plus);
  out.validation = build(minus, dropped_minus);
  return out;
}

nlohmann::json ensemble_summary(const TrialEnsemble& e) {
  const KinematicFeatures kf = kinematic_features(e);
  double mean_duration = 0.0;
  if (!e.durations.empty()) {
    mean_duration = std::accumulate(e.durations.begin(), e.durations.end(), 0.0) /
                    static_cast<double>(e.durations.size());
  }
  return nlohmann::json{
      {"subject_id", e.subject_id},
      {"sign", e.sign},
      {"target", e.target},
      {"N", e.N},
      {"dt", e.dt},
      {"retained", e.trials.size()},
      {"dropped", e.dropped},
      {"durations", int_array(e.durations)},
      {"mean_duration", mean_duration},
      {"thresholds", e.thresholds},
      {"starts", int_array(e.starts)},
      {"step_indices", int_array(e.step_indices)},
      {"kinematics",
       {{"peaks", kf.peaks},
        {"max_to_mean", kf.max_to_mean},
        {"skewness", kf.skewness}}}};
}

std::filesystem::path write_ensemble(const std::filesystem::path& dir,
                                     const std::string& stem,
                                     const TrialEnsemble& e) {
  const int steps = e.moments.size();
  CsvTable mean, cov, trials;
  mean.header = {"t", "phi", "phi_dot"};
  cov.header = {"t", "phi_phi", "phi_phi_dot", "phi_dot_phi_dot"};
  trials.header = {"t"};
  for (std::size_t k = 0; k < e.trials.size(); ++k) {
    trials.header.push_back("phi_" + std::to_string(k));
  }
  for (std::size_t k = 0; k < e.trials.size(); ++k) {
    trials.header.push_back("phi_dot_" + std::to_string(k));
  }
  for (int t = 0; t < steps; ++t) {
    const auto& m = e.moments.mean[t];
    const auto& c = e.moments.cov[t];
    mean.rows.push_back({double(t), m(0), m(1)});
    cov.rows.push_back({double(t), c(0, 0), c(0, 1), c(1, 1)});
    std::vector<double> row{double(t)};
    for (const auto& tr : e.trials) row.push_back(tr(t, 0));
    for (const auto& tr : e.trials) row.push_back(tr(t, 1));
    trials.rows.push_back(std::move(row));
  }
  write_csv(dir / (stem + "_mean.csv"), mean);
  write_csv(dir / (stem + "_cov.csv"), cov);
  write_csv(dir / (stem + "_trials.csv"), trials);
  nlohmann::json meta = ensemble_summary(e);
  meta["schema_version"] = 1;
  meta["files"] = {{"mean", stem + "_mean.csv"},
                   {"cov", stem + "_cov.csv"},
                   {"trials", stem + "_trials.csv"}};
  const auto path = dir / (stem + ".json");
  write_json(path, meta);
  return path;
}

TrialEnsemble read_ensemble(const std::filesystem::path& meta_path) {
  const nlohmann::json meta = read_json(meta_path);
  const auto dir = meta_path.parent_path();
  TrialEnsemble e;
  try {
    e.subject_id = meta.at("subject_id").get<std::string>();
    e.sign = meta.at("sign").get<int>();
    e.target = meta.at("target").get<double>();
    e.N = meta.at("N").get<int>();
    e.dt = meta.value("dt", 0.01);
    e.dropped = meta.value("dropped", 0);
    e.durations = meta.value("durations", std::vector<int>{});
    e.thresholds = meta.value("thresholds", std::vector<double>{});
    e.starts = meta.value("starts", std::vector<int>{});
    e.step_indices = meta.value("step_indices", std::vector<int>{});
    const auto& files = meta.at("files");
    const CsvTable mean = read_csv(dir / files.at("mean").get<std::string>());
    const CsvTable cov = read_csv(dir / files.at("cov").get<std::string>());
    const auto phi = mean.column_values("phi");
    const auto phid = mean.column_values("phi_dot");
    const auto c00 = cov.column_values("phi_phi");
    const auto c01 = cov.column_values("phi_phi_dot");
    const auto c11 = cov.column_values("phi_dot_phi_dot");
    if (static_cast<int>(phi.size()) != e.N + 1 ||
        static_cast<int>(c00.size()) != e.N + 1) {
      throw InvalidArgument("ensemble " + meta_path.string() +
                            ": moment files do not cover t = 0..N");
    }
    for (int t = 0; t <= e.N; ++t) {
      e.moments.mean.push_back(Eigen::Vector2d(phi[t], phid[t]));
      Eigen::Matrix2d c;
      c << c00[t], c01[t], c01[t], c11[t];
      e.moments.cov.push_back(c);
    }
    if (files.contains("trials")) {
      const CsvTable tr = read_csv(dir / files.at("trials").get<std::string>());
      const int K = (static_cast<int>(tr.header.size()) - 1) / 2;
      for (int k = 0; k < K; ++k) {
        Eigen::MatrixXd m(e.N + 1, 2);
        for (int t = 0; t <= e.N; ++t) {
          m(t, 0) = tr.rows.at(t).at(1 + k);
          m(t, 1) = tr.rows.at(t).at(1 + K + k);
        }
        e.trials.push_back(std::move(m));
      }
    }
  } catch (const nlohmann::json::exception& ex) {
    throw InvalidArgument("ensemble " + meta_path.string() + ": " + ex.what());
  } catch (const std::out_of_range&) {
    throw InvalidArgument("ensemble " + meta_path.string() + ": truncated trials");
  }
  return e;
}

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = nlohmann::json{{"dt", c.dt},
                     {"angle_tol", c.angle_tol},
                     {"start_velocity", c.start_velocity},
                     {"velocity_step", c.velocity_step},
                     {"max_start_velocity", c.max_start_velocity},
                     {"end_velocity", c.end_velocity}};
  j["spline_alpha"] = c.spline_alpha ? nlohmann::json(*c.spline_alpha)
                                     : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  const PipelineConfig def;
  c.dt = j.value("dt", def.dt);
  c.angle_tol = j.value("angle_tol", def.angle_tol);
  c.start_velocity = j.value("start_velocity", def.start_velocity);
  c.velocity_step = j.value("velocity_step", def.velocity_step);
  c.max_start_velocity = j.value("max_start_velocity", def.max_start_velocity);
  c.end_velocity = j.value("end_velocity", def.end_velocity);
  c.spline_alpha.reset();
  if (j.contains("spline_alpha") && !j.at("spline_alpha").is_null()) {
    c.spline_alpha = j.at("spline_alpha").get<double>();
  }
  c.validate();
}

}  // namespace lqsid
