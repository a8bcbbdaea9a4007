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

#ifndef LQSID_MOMENTS_HPP_
#define LQSID_MOMENTS_HPP_

#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "lqsid/model.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {

// Joint closed-loop moments of z_t = [x_t; xhat_t], t = 0..N.
struct MomentTrajectory {
  int n = 0;
  std::vector<Eigen::VectorXd> mean;  // 2n
  std::vector<Eigen::MatrixXd> cov;   // 2n x 2n

  int horizon() const { return static_cast<int>(mean.size()) - 1; }
  Eigen::VectorXd state_mean(int t) const { return mean[t].head(n); }
  Eigen::MatrixXd state_cov(int t) const {
    return cov[t].topLeftCorner(n, n);
  }
};

// Mean and covariance of a selected output, one entry per time step.
struct ObservedMoments {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> cov;

  int dim() const { return mean.empty() ? 0 : static_cast<int>(mean[0].size()); }
  int size() const { return static_cast<int>(mean.size()); }
};

// Exact mean and covariance recursion of the closed loop formed by the
// plant, the feedback u = -L xhat and the estimator with gains K, including
// the control- and state-dependent noise contributions. The estimator's own
// internal noise is taken as zero. For a fully observed problem xhat = x and
// all four covariance blocks coincide.
//
// Throws NumericalError on non-finite values or when a covariance has an
// eigenvalue below -1e-9 (relative to its magnitude once that exceeds 1).
MomentTrajectory propagate(const LqsProblem& prob, const GainSchedule& gains);

// Returns M E[x_t] and M Omega_t^x M' for every t. M must consist of distinct
// rows of the identity.
ObservedMoments observed_moments(const MomentTrajectory& mt,
                                 const Eigen::MatrixXd& M);

// True when M is made of distinct rows of the identity matrix.
bool is_selection_matrix(const Eigen::MatrixXd& M);

// CSV with columns t, the 2n means (x then xhat) and the upper-triangular
// entries of the joint covariance, row-major.
void write_moments_csv(std::ostream& out, const MomentTrajectory& mt);

}  // namespace lqsid

#endif  // LQSID_MOMENTS_HPP_
