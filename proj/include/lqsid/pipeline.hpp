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

#ifndef LQSID_PIPELINE_HPP_
#define LQSID_PIPELINE_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lqsid/moments.hpp"

namespace lqsid {

// One recorded session sampled at a fixed rate. `velocity` is empty until
// smooth_and_differentiate has run.
struct RawSession {
  std::string subject_id;
  std::vector<double> time;       // s
  std::vector<double> angle;      // rad
  std::vector<double> reference;  // rad, piecewise constant
  std::vector<double> velocity;   // rad/s

  int size() const { return static_cast<int>(time.size()); }
  // Equal lengths and uniform sampling at `dt` within 1e-6 s.
  void validate(double dt = 0.01) const;
};

// Reads a CSV with the columns time_s, angle_rad, reference_rad.
RawSession read_session_csv(const std::filesystem::path& path,
                            const std::string& subject_id);
void write_session_csv(const std::filesystem::path& path,
                       const RawSession& session);

struct PipelineConfig {
  double dt = 0.01;
  double angle_tol = 0.05;          // |phi - target| counted as "at" target
  double start_velocity = 0.1;      // initial quiet-velocity threshold
  double velocity_step = 0.01;      // relaxation increment
  double max_start_velocity = 0.4;  // give up above this threshold
  double end_velocity = 0.1;
  std::optional<double> spline_alpha;  // empty: choose by GCV

  void validate() const;
};

// Replaces the angle by its cubic smoothing-spline fit and sets the velocity
// to the spline's derivative at the samples.
RawSession smooth_and_differentiate(const RawSession& session,
                                    std::optional<double> alpha = {});

// One repetition of a reference step. Samples run from `start` to the end
// of the target plateau.
struct Segment {
  int step_index = 0;  // first sample of the new reference value
  int start = 0;
  std::optional<int> end;  // first settled sample, absent if never settled
  double threshold = 0.0;  // quiet-velocity threshold that found `start`
  double target = 0.0;
  std::vector<double> angle;
  std::vector<double> velocity;

  std::optional<int> duration() const {
    return end ? std::optional<int>(*end - start) : std::nullopt;
  }
};

struct SegmentationResult {
  std::vector<Segment> segments;
  std::vector<int> dropped_steps;  // step indices without a quiet start
};

// Cuts every step from a zero plateau to a reference of sign `step_sign`.
// The start is the last sample before the step with |phi| <= angle_tol and
// |phi_dot| below a threshold that begins at start_velocity and is relaxed
// in velocity_step increments up to max_start_velocity; a repetition with
// no such sample is dropped. The end is the first sample inside the target
// plateau within angle_tol of the target with |phi_dot| < end_velocity.
// Needs a session with velocity.
SegmentationResult segment_movements(const RawSession& session, int step_sign,
                                     const PipelineConfig& cfg = {});

// Aligned repetitions of one movement with their moment estimates.
struct TrialEnsemble {
  std::string subject_id;
  int sign = 1;
  double target = 0.0;
  int N = 0;
  double dt = 0.01;
  std::vector<Eigen::MatrixXd> trials;  // (N+1) x 2 each: phi, phi_dot
  ObservedMoments moments;              // m_hat, omega_hat over t = 0..N
  int dropped = 0;
  std::vector<int> durations;  // of repetitions that reached the target
  std::vector<double> thresholds;
  std::vector<int> starts;
  std::vector<int> step_indices;

  // Same ensemble mirrored through zero.
  TrialEnsemble negated() const;
};

// Rounded mean of the given durations. Throws InvalidArgument when empty.
int average_duration(const std::vector<int>& durations);

// Aligns every segment at its start and cuts or extends it (repeating the
// last sample) to N+1 samples, then forms the per-step sample mean and
// covariance (divisor K-1) of (phi, phi_dot). Needs two segments.
TrialEnsemble ensemble_moments(const std::vector<Segment>& segments, int N);

struct KinematicFeatures {
  int peaks = 0;
  double max_to_mean = 0.0;
  double skewness = 0.0;
};

// Features of a speed profile: strict interior local maxima above 10% of
// the global maximum, ratio of the maximum to the trapezoidal time average,
// and the skewness of the profile read as a density over time.
KinematicFeatures kinematic_features(const std::vector<double>& speed);
// Features of sign * E[phi_dot] of an ensemble.
KinematicFeatures kinematic_features(const TrialEnsemble& ensemble);

struct SubjectEnsembles {
  std::string subject_id;
  TrialEnsemble train;       // +target steps
  TrialEnsemble validation;  // -target steps
};

// Smooths, segments and pools every session of one subject. Throws
// InvalidArgument when a step sign is missing or too few repetitions remain.
SubjectEnsembles split_train_validation(const std::vector<RawSession>& sessions,
                                        const PipelineConfig& cfg = {});

// Ensemble files: <stem>_mean.csv, <stem>_cov.csv, <stem>_trials.csv and
// <stem>.json with the metadata. Returns the metadata file.
std::filesystem::path write_ensemble(const std::filesystem::path& dir,
                                     const std::string& stem,
                                     const TrialEnsemble& ensemble);
TrialEnsemble read_ensemble(const std::filesystem::path& meta_path);

nlohmann::json ensemble_summary(const TrialEnsemble& ensemble);

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

}  // namespace lqsid

#endif  // LQSID_PIPELINE_HPP_
