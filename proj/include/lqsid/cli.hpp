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

#ifndef LQSID_CLI_HPP_
#define LQSID_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lqsid/compare.hpp"
#include "lqsid/pipeline.hpp"
#include "lqsid/synthetic.hpp"

namespace lqsid {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNumerical = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kRunConfigSchema = 1;

// Settings of the `simulate` command. "rollout" samples closed-loop
// trajectories of one model; "sessions" writes a synthetic raw-data cohort
// with its manifest.
struct SimulateConfig {
  std::string kind = "rollout";
  ParamVectors params;
  int trials = 100;
  int N = 60;
  Eigen::Vector2d x0_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d x0_var = Eigen::Vector2d::Zero();
  SyntheticSessionConfig sessions;
  int subjects = 1;
  std::vector<ParamVectors> subject_params;  // optional, one per subject
};

struct RunConfig {
  std::filesystem::path manifest;   // raw-data manifest for `prep`
  std::filesystem::path ensembles;  // ensemble index; default under `out`
  std::filesystem::path out = "out";
  ModelKind model = ModelKind::kLqs;
  std::uint64_t seed = 0;
  int jobs = 0;  // 0: all cores
  PipelineConfig pipeline;
  CompareConfig compare;
  SimulateConfig simulate;

  std::filesystem::path ensemble_index() const;
};

// Parses a run configuration. Relative paths are taken relative to the
// directory of the file. Throws InvalidArgument on a missing or unsupported
// schema_version and on invalid settings.
RunConfig load_run_config(const std::filesystem::path& path);

// Command bodies. Each throws InvalidArgument for usage and configuration
// problems and NumericalError for model failures.
void cmd_prep(const RunConfig& cfg, std::ostream& log);
void cmd_identify(const RunConfig& cfg, std::ostream& log);
void cmd_simulate(const RunConfig& cfg, std::ostream& log);
void cmd_compare(const RunConfig& cfg, std::ostream& log);
void cmd_report(const RunConfig& cfg, std::ostream& log);

// Ensembles listed in an index written by cmd_prep.
std::vector<SubjectEnsembles> load_ensembles(const std::filesystem::path& index);

// Full command line front end: parses `args` (without the program name),
// runs the subcommand and maps failures to exit codes.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace lqsid

#endif  // LQSID_CLI_HPP_
