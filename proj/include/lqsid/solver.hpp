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

#ifndef LQSID_SOLVER_HPP_
#define LQSID_SOLVER_HPP_

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lqsid/model.hpp"

namespace lqsid {

struct SolverOptions {
  int max_outer_iters = 100;
  double gain_tol = 1e-8;

  void validate() const;
};

// Time-varying feedback u_t = -L_t xhat_t and estimator gains
// xhat_{t+1} = A xhat_t + B u_t + K_t (y_t - H xhat_t), t = 0..N-1.
struct GainSchedule {
  std::vector<Eigen::MatrixXd> L;  // m x n
  std::vector<Eigen::MatrixXd> K;  // n x r; zero when fully observed
  int iterations = 0;
  bool converged = false;
  // Max elementwise change of (L, K) after each outer iteration >= 2.
  std::vector<double> gain_change;
};

// Cost-to-go and second-moment matrices of the last outer iteration.
// Zx/Ze are indexed t = 0..N, the second moments t = 0..N. Pex = Pxe'.
struct SolverWorkspace {
  std::vector<Eigen::MatrixXd> Zx, Ze;
  std::vector<Eigen::MatrixXd> Pe, Px, Pxe;
};

// Alternates a backward pass for the control gains (given the current
// estimator gains, starting from K = 0) with a forward pass for the
// estimator gains until the largest gain change drops below opts.gain_tol.
// A fully observed problem needs a single backward pass.
//
// Throws NumericalError when an inner matrix is not positive definite or the
// recursion produces non-finite values.
GainSchedule synthesize(const LqsProblem& prob, const SolverOptions& opts = {},
                        SolverWorkspace* workspace = nullptr);

// Single backward Riccati pass for a noise-free problem.
GainSchedule synthesize_lq(const LqsProblem& prob);

void to_json(nlohmann::json& j, const GainSchedule& g);

}  // namespace lqsid

#endif  // LQSID_SOLVER_HPP_
