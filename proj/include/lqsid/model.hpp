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

#ifndef LQSID_MODEL_HPP_
#define LQSID_MODEL_HPP_

#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace lqsid {

// Control-dependent noise term C = scale * B * F of the state equation.
struct ControlNoiseTerm {
  double scale = 0.0;
  Eigen::MatrixXd F;  // m x m
};

// State-dependent noise term D = scale * H * G of the output equation.
struct StateNoiseTerm {
  double scale = 0.0;
  Eigen::MatrixXd G;  // n x n
};

// Finite-horizon linear-quadratic problem with additive and signal-dependent
// noise:
//
//   x_{t+1} = A x_t + B u_t + sigma_xi a_t + sum_i e_t^i C_i u_t
//   y_t     = H x_t + sigma_omega b_t + sum_i e'_t^i D_i x_t
//
// with cost E[x_N' Q_N x_N + sum_t x_t' Q x_t + u_t' R u_t]. When
// `fully_observed` is set the controller acts on the true state and the
// output equation is ignored.
struct LqsProblem {
  Eigen::MatrixXd A;            // n x n
  Eigen::MatrixXd B;            // n x m
  Eigen::MatrixXd H;            // r x n
  Eigen::MatrixXd sigma_xi;     // n x p
  Eigen::MatrixXd sigma_omega;  // r x q
  std::vector<ControlNoiseTerm> control_noise;
  std::vector<StateNoiseTerm> state_noise;
  Eigen::MatrixXd Q_N;  // n x n
  Eigen::MatrixXd Q;    // n x n
  Eigen::MatrixXd R;    // m x m
  int N = 0;
  Eigen::VectorXd x0_mean;  // n
  Eigen::MatrixXd x0_cov;   // n x n
  bool fully_observed = false;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int r() const { return static_cast<int>(H.rows()); }

  // C_i = scale_i * B * F_i
  std::vector<Eigen::MatrixXd> control_noise_matrices() const;
  // D_i = scale_i * H * G_i
  std::vector<Eigen::MatrixXd> state_noise_matrices() const;
  // sigma_xi * sigma_xi'
  Eigen::MatrixXd process_noise_cov() const;
  // sigma_omega * sigma_omega'
  Eigen::MatrixXd observation_noise_cov() const;

  bool has_signal_dependent_noise() const;

  // Throws InvalidArgument on inconsistent dimensions, asymmetric or
  // indefinite cost matrices, an indefinite initial covariance, negative noise
  // scalings or a non-positive horizon.
  void validate() const;
};

// Physical constants of the steering-wheel experiment. The wheel is a
// spring-damper driven by the human torque M_h, which is the output of a
// two-stage first-order muscle filter on the neural activation u.
struct DrivingParams {
  double theta = 0.056;  // inertia [kg m^2]
  double c = 1.146;      // spring constant [N m]
  double d = 0.859;      // damping [N m s]
  double tau1 = 0.04;    // activation -> excitation time constant [s]
  double tau2 = 0.04;    // excitation -> torque time constant [s]
  double dt = 0.01;      // sampling period [s]
  double phi_ref = 2.0 * std::numbers::pi / 3.0;  // target angle [rad]
  int N = 60;                                    // horizon [steps]

  void validate() const;
};

// Cost parameters s = (s1..s4) and noise parameters sigma = (sigma1..sigma11)
// of the driving model. Zero-based storage: s(0) is s1.
struct ParamVectors {
  static constexpr int kCostSize = 4;
  static constexpr int kNoiseSize = 11;

  Eigen::VectorXd s = Eigen::VectorXd::Zero(kCostSize);
  Eigen::VectorXd sigma = Eigen::VectorXd::Zero(kNoiseSize);

  void validate() const;
};

// Driving state layout.
enum DrivingState : int { kPhi = 0, kPhiDot, kTorque, kExcitation, kTarget };
inline constexpr int kDrivingStates = 5;

// Continuous-time matrices (A_c, B_c) of the driving model, state
// [phi, phi_dot, M_h, g, phi_r].
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> driving_continuous_dynamics(
    const DrivingParams& p);

// Zero-order-hold discretization: expm([[A_c, B_c], [0, 0]] * dt).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_zoh(
    const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double dt);

// Assembles the 5-state, 1-input, 3-output driving problem. The initial state
// is at rest at phi = 0 with the target set to p.phi_ref and zero covariance;
// use set_driving_initial_state to start from measured moments.
LqsProblem build_driving_problem(const DrivingParams& p,
                                 const ParamVectors& params);

// Static-equilibrium initial state from a measured angle/velocity mean and
// their 2x2 covariance: M_h = c * phi0, g = M_h, phi_r = p.phi_ref.
void set_driving_initial_state(LqsProblem& prob, const DrivingParams& p,
                               const Eigen::Vector2d& mean0,
                               const Eigen::Matrix2d& cov0);

// Same problem without signal-dependent noise.
LqsProblem reduce_to_lqg(const LqsProblem& prob);

// Deterministic, fully observed version: every noise scaling zeroed.
LqsProblem reduce_to_lq(const LqsProblem& prob);

// Row-selection matrix M = [I_k 0] picking the first k of n states.
Eigen::MatrixXd leading_selection(int k, int n);

void to_json(nlohmann::json& j, const LqsProblem& p);
void from_json(const nlohmann::json& j, LqsProblem& p);
void to_json(nlohmann::json& j, const DrivingParams& p);
void from_json(const nlohmann::json& j, DrivingParams& p);
void to_json(nlohmann::json& j, const ParamVectors& p);
void from_json(const nlohmann::json& j, ParamVectors& p);

}  // namespace lqsid

#endif  // LQSID_MODEL_HPP_
