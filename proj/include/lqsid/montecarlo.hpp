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

#ifndef LQSID_MONTECARLO_HPP_
#define LQSID_MONTECARLO_HPP_

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lqsid/model.hpp"
#include "lqsid/moments.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {

// SplitMix64 finalizer; maps (seed, stream index) to independent seeds.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

// Standard normal draws from std::mt19937_64 through the Box-Muller
// transform. Both pieces are fully specified, so a given seed yields the same
// sequence on every platform (std::normal_distribution does not).
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double next();
  // Uniform in (0, 1) with 53 random bits.
  double uniform();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// One step of the closed loop: applies u = -L xhat, advances the plant and,
// unless the problem is fully observed, the estimator with gain K. Draws the
// additive process noise, the control-dependent noise, the observation noise
// and the state-dependent noise from `rng` in that order. Holds scratch
// space, so use one instance per thread.
class ClosedLoopStepper {
 public:
  explicit ClosedLoopStepper(const LqsProblem& prob);

  void step(const Eigen::MatrixXd& L, const Eigen::MatrixXd& K,
            NormalStream& rng, Eigen::VectorXd& x, Eigen::VectorXd& xhat);

 private:
  const LqsProblem& prob_;
  std::vector<Eigen::MatrixXd> Cs_, Ds_;
  Eigen::VectorXd alpha_, beta_, u_, y_, x_next_;
};

// K sampled closed-loop state trajectories, stored rollout-major as
// K x (N+1) x n.
struct RolloutBatch {
  int K = 0;
  int N = 0;
  int n = 0;
  std::uint64_t seed = 0;
  std::vector<double> data;

  double at(int k, int t, int i) const {
    return data[(static_cast<std::size_t>(k) * (N + 1) + t) * n + i];
  }
  Eigen::Map<const Eigen::VectorXd> state(int k, int t) const {
    return Eigen::Map<const Eigen::VectorXd>(
        data.data() + (static_cast<std::size_t>(k) * (N + 1) + t) * n, n);
  }
};

// Simulates the plant, the output equation and the estimator with
// u_t = -L_t xhat_t. Rollout k uses its own NormalStream seeded with
// substream_seed(seed, k) and draws, in order: the initial state, then per
// step the additive process noise, the control-dependent noise, the
// observation noise and the state-dependent noise. Results therefore do not
// depend on `jobs`.
RolloutBatch rollout(const LqsProblem& prob, const GainSchedule& gains, int K,
                     std::uint64_t seed, int jobs = 1);

// Per-step sample mean and unbiased (K-1) sample covariance of M x_t.
ObservedMoments sample_moments(const RolloutBatch& batch,
                               const Eigen::MatrixXd& M);

// Standard errors of the sample mean and of each sample covariance entry,
// the latter estimated from the fourth central moments.
ObservedMoments sample_moment_standard_errors(const RolloutBatch& batch,
                                              const Eigen::MatrixXd& M);

// One CSV per rollout (time_s plus one column per selected state) and a
// manifest.json with the seed, rollout count and a hash of the problem.
void write_rollouts(const std::filesystem::path& dir, const RolloutBatch& batch,
                    const LqsProblem& prob, const Eigen::MatrixXd& M,
                    double dt);

}  // namespace lqsid

#endif  // LQSID_MONTECARLO_HPP_
