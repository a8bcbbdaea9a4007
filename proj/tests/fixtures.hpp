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

// Shared generator settings for tests that simulate steering sessions.

#ifndef LQSID_TESTS_FIXTURES_HPP_
#define LQSID_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "lqsid/compare.hpp"
#include "lqsid/model.hpp"
#include "lqsid/pipeline.hpp"
#include "lqsid/synthetic.hpp"

namespace lqsid::fixture {

// Ground truth of the synthetic subjects, sigma8 = 0.3.
inline ParamVectors truth_params(double sigma8 = 0.3) {
  ParamVectors p;
  p.s << 1e5, 1e3, 100, 1;
  p.sigma << 5e-4, 3e-3, 1e-3, 1e-3, 1e-2, 5e-2, 1e-2, sigma8, 0, 0, 0;
  return p;
}

inline SyntheticSessionConfig session_config(int repetitions = 14) {
  SyntheticSessionConfig c;
  c.params = truth_params();
  c.repetitions = repetitions;
  c.sensor_noise = 2e-4;
  return c;
}

// Train and validation ensembles of one simulated subject.
inline SubjectEnsembles subject(const std::string& id, std::uint64_t seed,
                                int repetitions = 14,
                                const ParamVectors& params = truth_params()) {
  SyntheticSessionConfig c = session_config(repetitions);
  c.params = params;
  return split_train_validation({simulate_session(c, id, seed)});
}

// Coarse search that keeps unit tests quick: three points per axis, one
// alternation and few grid refinements.
inline CompareConfig quick_compare_config() {
  CompareConfig c;
  c.isoc.grid_points = 3;
  c.isoc.outer_iters = 1;
  c.isoc.min_width_ratio = 0.05;
  c.isoc.stall_levels = 1;
  c.jobs = 1;
  return c;
}

// Segmentation fixture.
inline constexpr double kStepTarget = 2.0 * std::numbers::pi / 3.0;
inline constexpr int kPlateau = 100;
inline constexpr int kRamp = 40;

// Per-repetition shape of the constructed fixture.
struct RepSpec {
  int delay = 0;             // ramp onset relative to the step (may be < 0)
  double pre_velocity = 0;   // |phi_dot| on the zero plateau before the step
  double amplitude = 1.0;    // fraction of the target reached
};

// Session with the reference 0, +T, 0, -T per repetition. Each response is a
// raised-cosine ramp of kRamp samples with its exact derivative, so every
// boundary of the segmentation is known in closed form.
inline RawSession fixture_session(const std::vector<RepSpec>& reps, bool mirrored = true) {
  RawSession s;
  s.subject_id = "F01";
  const int n = static_cast<int>(reps.size()) * 4 * kPlateau;
  s.time.resize(n);
  s.angle.assign(n, 0.0);
  s.velocity.assign(n, 0.0);
  s.reference.assign(n, 0.0);
  for (int i = 0; i < n; ++i) s.time[i] = i * 0.01;
  const auto ramp = [&](int onset, double from, double to, int until) {
    for (int i = onset; i < until; ++i) {
      const double tau = std::min(1.0, (i - onset) / static_cast<double>(kRamp));
      s.angle[i] = from + (to - from) * 0.5 * (1.0 - std::cos(std::numbers::pi * tau));
      s.velocity[i] = tau < 1.0 ? (to - from) * 0.5 * std::numbers::pi /
                                      (kRamp * 0.01) * std::sin(std::numbers::pi * tau)
                                : 0.0;
    }
  };
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const int base = static_cast<int>(r) * 4 * kPlateau;
    const RepSpec& spec = reps[r];
    const double peak = spec.amplitude * kStepTarget;
    for (int k = 0; k < kPlateau; ++k) {
      s.reference[base + kPlateau + k] = kStepTarget;
      s.reference[base + 3 * kPlateau + k] = mirrored ? -kStepTarget : -0.5 * kStepTarget;
    }
    for (int i = base; i < base + kPlateau + spec.delay; ++i) {
      s.velocity[i] = (i % 2 ? 1.0 : -1.0) * spec.pre_velocity;
    }
    ramp(base + kPlateau + spec.delay, 0.0, peak, base + 2 * kPlateau);
    ramp(base + 2 * kPlateau, peak, 0.0, base + 3 * kPlateau);
    for (int i = base + 2 * kPlateau; i < base + 3 * kPlateau + spec.delay; ++i) {
      if (i >= base + 2 * kPlateau + kRamp) {
        s.velocity[i] = (i % 2 ? 1.0 : -1.0) * spec.pre_velocity;
      }
    }
    const double back = mirrored ? -peak : -0.5 * peak;
    ramp(base + 3 * kPlateau + spec.delay, 0.0, back, base + 4 * kPlateau);
  }
  return s;
}

}  // namespace lqsid::fixture

#endif  // LQSID_TESTS_FIXTURES_HPP_
