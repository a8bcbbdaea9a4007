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

#include "lqsid/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"
#include "lqsid/montecarlo.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {
namespace {

struct Plan {
  int begin;
  int end;
  double target;
  bool hold;
};

std::vector<Plan> plan_session(const std::vector<double>& ref, int plateau,
                               int horizon) {
  const int total = static_cast<int>(ref.size());
  std::vector<int> movement_starts{0};
  for (int k = plateau; k < total; k += plateau) movement_starts.push_back(k - 1);
  std::vector<Plan> plans;
  for (std::size_t j = 0; j < movement_starts.size(); ++j) {
    const int a = movement_starts[j];
    const int next = j + 1 < movement_starts.size() ? movement_starts[j + 1] : total;
    // The first plan holds the initial rest; later plans look one sample
    // ahead to the new reference.
    const double target = j == 0 ? ref[0] : ref[a + 1];
    const int b = j == 0 ? next : std::min(next, a + horizon);
    plans.push_back({a, b, target, j == 0});
    if (b < next) plans.push_back({b, next, target, true});
  }
  return plans;
}

}  // namespace

void SyntheticSessionConfig::validate() const {
  driving.validate();
  params.validate();
  if (repetitions < 1) throw InvalidArgument("synthetic: repetitions < 1");
  if (plateau_steps < 2) throw InvalidArgument("synthetic: plateau_steps < 2");
  if (horizon < 1 || horizon > plateau_steps) {
    throw InvalidArgument("synthetic: horizon must lie in [1, plateau_steps]");
  }
  if (!(sensor_noise >= 0.0) || !(encoder_resolution >= 0.0)) {
    throw InvalidArgument("synthetic: sensor settings must be >= 0");
  }
}

RawSession simulate_session(const SyntheticSessionConfig& cfg,
                            const std::string& subject_id, std::uint64_t seed) {
  cfg.validate();
  const int P = cfg.plateau_steps;
  const int total = 4 * P * cfg.repetitions;
  const double pattern[4] = {0.0, cfg.target, 0.0, -cfg.target};

  RawSession s;
  s.subject_id = subject_id;
  s.time.resize(total);
  s.angle.resize(total);
  s.reference.resize(total);
  for (int k = 0; k < total; ++k) {
    s.time[k] = k * cfg.driving.dt;
    s.reference[k] = pattern[(k / P) % 4];
  }

  LqsProblem prob = build_driving_problem(cfg.driving, cfg.params);
  NormalStream plant_rng(substream_seed(seed, 0));
  NormalStream sensor_rng(substream_seed(seed, 1));
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kDrivingStates);
  Eigen::VectorXd xhat = x;

  for (const Plan& plan : plan_session(s.reference, P, cfg.horizon)) {
    x(kTarget) = xhat(kTarget) = plan.target;
    prob.N = plan.end - plan.begin;
    prob.x0_mean = xhat;
    prob.x0_cov.setZero();
    // Holding pays the angle-error and velocity terms of the terminal cost at
    // every step; with a terminal cost alone the wheel would spring back in
    // between, and the torque term would fight the spring.
    prob.Q.setZero();
    if (plan.hold) {
      prob.Q = prob.Q_N;
      prob.Q(kTorque, kTorque) = 0.0;
    }
    const GainSchedule gains = synthesize(prob);
    ClosedLoopStepper stepper(prob);
    for (int t = 0; t < prob.N; ++t) {
      const int k = plan.begin + t;
      double meas = x(kPhi) + cfg.sensor_noise * sensor_rng.next();
      if (cfg.encoder_resolution > 0.0) {
        meas = std::round(meas / cfg.encoder_resolution) * cfg.encoder_resolution;
      }
      s.angle[k] = meas;
      stepper.step(gains.L[t], gains.K[t], plant_rng, x, xhat);
      if (!x.allFinite() || !xhat.allFinite()) {
        throw NumericalError("synthetic session diverged at sample " +
                             std::to_string(k));
      }
    }
  }
  return s;
}

std::filesystem::path write_synthetic_cohort(
    const std::filesystem::path& dir, const SyntheticSessionConfig& cfg,
    int subjects, std::uint64_t seed,
    const std::vector<ParamVectors>& per_subject_params) {
  if (subjects < 1) throw InvalidArgument("synthetic: need at least one subject");
  if (!per_subject_params.empty() &&
      static_cast<int>(per_subject_params.size()) != subjects) {
    throw InvalidArgument("synthetic: one parameter set per subject expected");
  }
  std::filesystem::create_directories(dir);
  nlohmann::json list = nlohmann::json::array();
  for (int k = 0; k < subjects; ++k) {
    char id[16];
    std::snprintf(id, sizeof id, "S%02d", k + 1);
    SyntheticSessionConfig sc = cfg;
    if (!per_subject_params.empty()) sc.params = per_subject_params[k];
    const RawSession s =
        simulate_session(sc, id, substream_seed(seed, static_cast<std::uint64_t>(k)));
    const std::string file = std::string(id) + "_session1.csv";
    write_session_csv(dir / file, s);
    list.push_back({{"id", id},
                    {"sessions", nlohmann::json::array({file})},
                    {"generator", sc.params}});
  }
  const auto manifest = dir / "manifest.json";
  write_json(manifest, {{"schema_version", 1},
                        {"seed", seed},
                        {"generator", cfg},
                        {"subjects", list}});
  return manifest;
}

void to_json(nlohmann::json& j, const SyntheticSessionConfig& c) {
  j = nlohmann::json{{"driving", c.driving},
                     {"params", c.params},
                     {"repetitions", c.repetitions},
                     {"plateau_steps", c.plateau_steps},
                     {"horizon", c.horizon},
                     {"target", c.target},
                     {"sensor_noise", c.sensor_noise},
                     {"encoder_resolution", c.encoder_resolution}};
}

void from_json(const nlohmann::json& j, SyntheticSessionConfig& c) {
  const SyntheticSessionConfig def;
  c.driving = j.value("driving", def.driving);
  c.params = j.contains("params") ? j.at("params").get<ParamVectors>() : def.params;
  c.repetitions = j.value("repetitions", def.repetitions);
  c.plateau_steps = j.value("plateau_steps", def.plateau_steps);
  c.horizon = j.value("horizon", def.horizon);
  c.target = j.value("target", def.target);
  c.sensor_noise = j.value("sensor_noise", def.sensor_noise);
  c.encoder_resolution = j.value("encoder_resolution", def.encoder_resolution);
}

}  // namespace lqsid
