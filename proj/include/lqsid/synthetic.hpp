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

#ifndef LQSID_SYNTHETIC_HPP_
#define LQSID_SYNTHETIC_HPP_

#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "lqsid/model.hpp"
#include "lqsid/pipeline.hpp"

namespace lqsid {

// A simulated steering session: the reference pattern 0, +target, 0,
// -target, each held for `plateau_steps` samples, repeated `repetitions`
// times. Each reference change starts a movement of `horizon` steps one
// sample early (the upcoming reference is visible ahead of time); the rest of
// every plateau is a holding movement with a running angle-error and velocity
// cost. The estimate carries over between movements and the gains are
// re-synthesized from it at every movement start.
struct SyntheticSessionConfig {
  DrivingParams driving;
  ParamVectors params;
  int repetitions = 14;
  int plateau_steps = 100;
  int horizon = 60;
  double target = 2.0 * std::numbers::pi / 3.0;
  // Angle sensor: additive Gaussian noise, then rounding to the resolution.
  double sensor_noise = 0.0;
  double encoder_resolution = 2.0 * std::numbers::pi / 40000.0;

  void validate() const;
};

RawSession simulate_session(const SyntheticSessionConfig& cfg,
                            const std::string& subject_id, std::uint64_t seed);

// Writes one session CSV per subject and the subject manifest listing them.
// Subject k is simulated with substream_seed(seed, k) and, when given,
// per_subject_params[k]. Returns the manifest path.
std::filesystem::path write_synthetic_cohort(
    const std::filesystem::path& dir, const SyntheticSessionConfig& cfg,
    int subjects, std::uint64_t seed,
    const std::vector<ParamVectors>& per_subject_params = {});

void to_json(nlohmann::json& j, const SyntheticSessionConfig& c);
void from_json(const nlohmann::json& j, SyntheticSessionConfig& c);

}  // namespace lqsid

#endif  // LQSID_SYNTHETIC_HPP_
