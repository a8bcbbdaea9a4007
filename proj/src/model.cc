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

#include "lqsid/model.hpp"

#include <cmath>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"

namespace lqsid {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows,
                   Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw InvalidArgument(std::string(name) + " must be " +
                          std::to_string(rows) + "x" + std::to_string(cols) +
                          ", got " + std::to_string(m.rows()) + "x" +
                          std::to_string(m.cols()));
  }
}

double scale_of(const Eigen::MatrixXd& m) {
  return std::max(1.0, m.cwiseAbs().maxCoeff());
}

bool symmetric(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return true;
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * scale_of(m);
}

bool positive_semidefinite(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -1e-9 * scale_of(m);
}

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

}  // namespace

std::vector<Eigen::MatrixXd> LqsProblem::control_noise_matrices() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(control_noise.size());
  for (const auto& term : control_noise) out.push_back(term.scale * B * term.F);
  return out;
}

std::vector<Eigen::MatrixXd> LqsProblem::state_noise_matrices() const {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(state_noise.size());
  for (const auto& term : state_noise) out.push_back(term.scale * H * term.G);
  return out;
}

Eigen::MatrixXd LqsProblem::process_noise_cov() const {
  if (sigma_xi.cols() == 0) return Eigen::MatrixXd::Zero(n(), n());
  return sigma_xi * sigma_xi.transpose();
}

Eigen::MatrixXd LqsProblem::observation_noise_cov() const {
  if (sigma_omega.cols() == 0) return Eigen::MatrixXd::Zero(r(), r());
  return sigma_omega * sigma_omega.transpose();
}

bool LqsProblem::has_signal_dependent_noise() const {
  for (const auto& t : control_noise) {
    if (t.scale != 0.0) return true;
  }
  for (const auto& t : state_noise) {
    if (t.scale != 0.0) return true;
  }
  return false;
}

void LqsProblem::validate() const {
  const Eigen::Index nx = A.rows();
  require(nx > 0, "A must be non-empty");
  require_shape(A, nx, nx, "A");
  require(B.rows() == nx && B.cols() > 0, "B must be n x m with m > 0");
  const Eigen::Index nu = B.cols();
  require(H.cols() == nx && H.rows() > 0, "H must be r x n with r > 0");
  const Eigen::Index ny = H.rows();
  require(sigma_xi.rows() == nx || sigma_xi.size() == 0,
          "sigma_xi must have n rows");
  require(sigma_omega.rows() == ny || sigma_omega.size() == 0,
          "sigma_omega must have r rows");
  for (const auto& t : control_noise) {
    require(t.scale >= 0.0 && std::isfinite(t.scale),
            "control noise scale must be finite and >= 0");
    require_shape(t.F, nu, nu, "F_i");
  }
  for (const auto& t : state_noise) {
    require(t.scale >= 0.0 && std::isfinite(t.scale),
            "state noise scale must be finite and >= 0");
    require_shape(t.G, nx, nx, "G_i");
  }
  require_shape(Q_N, nx, nx, "Q_N");
  require_shape(Q, nx, nx, "Q");
  require_shape(R, nu, nu, "R");
  require(N >= 1, "horizon N must be >= 1");
  require(x0_mean.size() == nx, "x0_mean must have n entries");
  require_shape(x0_cov, nx, nx, "x0_cov");

  for (const auto* m : {&A, &B, &H, &sigma_xi, &sigma_omega, &Q_N, &Q, &R,
                        &x0_cov}) {
    require(all_finite(*m), "problem matrices must be finite");
  }
  require(x0_mean.allFinite(), "x0_mean must be finite");
  require(symmetric(Q_N) && positive_semidefinite(Q_N),
          "Q_N must be symmetric positive semi-definite");
  require(symmetric(Q) && positive_semidefinite(Q),
          "Q must be symmetric positive semi-definite");
  require(symmetric(R), "R must be symmetric");
  require(Eigen::LLT<Eigen::MatrixXd>(R).info() == Eigen::Success,
          "R must be positive definite");
  require(symmetric(x0_cov) && positive_semidefinite(x0_cov),
          "x0_cov must be symmetric positive semi-definite");
}

void DrivingParams::validate() const {
  require(theta > 0 && c > 0 && d > 0 && tau1 > 0 && tau2 > 0,
          "physical constants must be strictly positive");
  require(dt > 0, "dt must be positive");
  require(std::isfinite(phi_ref), "phi_ref must be finite");
  require(N >= 1, "horizon N must be >= 1");
}

void ParamVectors::validate() const {
  require(s.size() == kCostSize, "cost vector must have 4 entries");
  require(sigma.size() == kNoiseSize, "noise vector must have 11 entries");
  require(s.allFinite() && sigma.allFinite(), "parameters must be finite");
  require((s.array() >= 0).all() && (sigma.array() >= 0).all(),
          "parameters must be >= 0");
  require(s(3) > 0, "s4 (control cost) must be > 0");
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> driving_continuous_dynamics(
    const DrivingParams& p) {
  p.validate();
  Eigen::MatrixXd Ac = Eigen::MatrixXd::Zero(kDrivingStates, kDrivingStates);
  Eigen::MatrixXd Bc = Eigen::MatrixXd::Zero(kDrivingStates, 1);
  // theta * phi'' = -c phi - d phi' + M_h
  Ac(kPhi, kPhiDot) = 1.0;
  Ac(kPhiDot, kPhi) = -p.c / p.theta;
  Ac(kPhiDot, kPhiDot) = -p.d / p.theta;
  Ac(kPhiDot, kTorque) = 1.0 / p.theta;
  // tau2 * M_h' + M_h = g
  Ac(kTorque, kTorque) = -1.0 / p.tau2;
  Ac(kTorque, kExcitation) = 1.0 / p.tau2;
  // tau1 * g' + g = u
  Ac(kExcitation, kExcitation) = -1.0 / p.tau1;
  Bc(kExcitation, 0) = 1.0 / p.tau1;
  return {Ac, Bc};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> discretize_zoh(
    const Eigen::MatrixXd& Ac, const Eigen::MatrixXd& Bc, double dt) {
  require(dt > 0, "dt must be positive");
  require(Ac.rows() == Ac.cols() && Bc.rows() == Ac.rows(),
          "discretize_zoh: dimension mismatch");
  const Eigen::Index n = Ac.rows();
  const Eigen::Index m = Bc.cols();
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(n + m, n + m);
  block.topLeftCorner(n, n) = Ac * dt;
  block.topRightCorner(n, m) = Bc * dt;
  const Eigen::MatrixXd e = block.exp();
  return {e.topLeftCorner(n, n), e.topRightCorner(n, m)};
}

LqsProblem build_driving_problem(const DrivingParams& p,
                                 const ParamVectors& params) {
  p.validate();
  params.validate();
  const auto& s = params.s;
  const auto& sg = params.sigma;
  constexpr int n = kDrivingStates;

  LqsProblem prob;
  auto [Ac, Bc] = driving_continuous_dynamics(p);
  std::tie(prob.A, prob.B) = discretize_zoh(Ac, Bc, p.dt);
  prob.H = Eigen::MatrixXd::Zero(3, n);
  prob.H.leftCols(3).setIdentity();

  // The target state carries no process noise, so its column is dropped.
  prob.sigma_xi = Eigen::MatrixXd::Zero(n, 4);
  for (int i = 0; i < 4; ++i) prob.sigma_xi(i, i) = sg(i);
  prob.sigma_omega = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < 3; ++i) prob.sigma_omega(i, i) = sg(4 + i);

  prob.control_noise.push_back({sg(7), Eigen::MatrixXd::Identity(1, 1)});
  for (int i = 0; i < 3; ++i) {
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    G(i, i) = 1.0;
    prob.state_noise.push_back({sg(8 + i), G});
  }

  prob.Q_N = Eigen::MatrixXd::Zero(n, n);
  prob.Q_N(kPhi, kPhi) = s(0);
  prob.Q_N(kTarget, kTarget) = s(0);
  prob.Q_N(kPhi, kTarget) = -s(0);
  prob.Q_N(kTarget, kPhi) = -s(0);
  prob.Q_N(kPhiDot, kPhiDot) = s(1);
  prob.Q_N(kTorque, kTorque) = s(2);
  prob.Q = Eigen::MatrixXd::Zero(n, n);
  prob.R = Eigen::MatrixXd::Constant(1, 1, s(3));
  prob.N = p.N;

  prob.x0_mean = Eigen::VectorXd::Zero(n);
  prob.x0_mean(kTarget) = p.phi_ref;
  prob.x0_cov = Eigen::MatrixXd::Zero(n, n);
  return prob;
}

void set_driving_initial_state(LqsProblem& prob, const DrivingParams& p,
                               const Eigen::Vector2d& mean0,
                               const Eigen::Matrix2d& cov0) {
  require(prob.n() == kDrivingStates, "not a driving problem");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(kDrivingStates);
  x0(kPhi) = mean0(0);
  x0(kPhiDot) = mean0(1);
  x0(kTorque) = p.c * mean0(0);
  x0(kExcitation) = x0(kTorque);
  x0(kTarget) = p.phi_ref;
  prob.x0_mean = x0;
  prob.x0_cov = Eigen::MatrixXd::Zero(kDrivingStates, kDrivingStates);
  prob.x0_cov.topLeftCorner(2, 2) = 0.5 * (cov0 + cov0.transpose());
}

LqsProblem reduce_to_lqg(const LqsProblem& prob) {
  LqsProblem out = prob;
  out.control_noise.clear();
  out.state_noise.clear();
  return out;
}

LqsProblem reduce_to_lq(const LqsProblem& prob) {
  LqsProblem out = reduce_to_lqg(prob);
  out.sigma_xi.setZero();
  out.sigma_omega.setZero();
  out.fully_observed = true;
  return out;
}

Eigen::MatrixXd leading_selection(int k, int n) {
  require(k >= 1 && k <= n, "selection size out of range");
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(k, n);
  M.leftCols(k).setIdentity();
  return M;
}

void to_json(nlohmann::json& j, const LqsProblem& p) {
  nlohmann::json cn = nlohmann::json::array();
  for (const auto& t : p.control_noise) {
    cn.push_back({{"scale", t.scale}, {"F", matrix_to_json(t.F)}});
  }
  nlohmann::json sn = nlohmann::json::array();
  for (const auto& t : p.state_noise) {
    sn.push_back({{"scale", t.scale}, {"G", matrix_to_json(t.G)}});
  }
  j = nlohmann::json{{"A", matrix_to_json(p.A)},
                     {"B", matrix_to_json(p.B)},
                     {"H", matrix_to_json(p.H)},
                     {"sigma_xi", matrix_to_json(p.sigma_xi)},
                     {"sigma_omega", matrix_to_json(p.sigma_omega)},
                     {"control_noise", cn},
                     {"state_noise", sn},
                     {"Q_N", matrix_to_json(p.Q_N)},
                     {"Q", matrix_to_json(p.Q)},
                     {"R", matrix_to_json(p.R)},
                     {"N", p.N},
                     {"x0_mean", vector_to_json(p.x0_mean)},
                     {"x0_cov", matrix_to_json(p.x0_cov)},
                     {"fully_observed", p.fully_observed}};
}

void from_json(const nlohmann::json& j, LqsProblem& p) {
  try {
    p.A = matrix_from_json(j.at("A"));
    p.B = matrix_from_json(j.at("B"));
    p.H = matrix_from_json(j.at("H"));
    p.sigma_xi = matrix_from_json(j.at("sigma_xi"));
    p.sigma_omega = matrix_from_json(j.at("sigma_omega"));
    p.control_noise.clear();
    for (const auto& t : j.value("control_noise", nlohmann::json::array())) {
      p.control_noise.push_back(
          {t.at("scale").get<double>(), matrix_from_json(t.at("F"))});
    }
    p.state_noise.clear();
    for (const auto& t : j.value("state_noise", nlohmann::json::array())) {
      p.state_noise.push_back(
          {t.at("scale").get<double>(), matrix_from_json(t.at("G"))});
    }
    p.Q_N = matrix_from_json(j.at("Q_N"));
    p.Q = matrix_from_json(j.at("Q"));
    p.R = matrix_from_json(j.at("R"));
    p.N = j.at("N").get<int>();
    p.x0_mean = vector_from_json(j.at("x0_mean"));
    p.x0_cov = matrix_from_json(j.at("x0_cov"));
    p.fully_observed = j.value("fully_observed", false);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("problem JSON: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const DrivingParams& p) {
  j = nlohmann::json{{"theta", p.theta}, {"c", p.c},       {"d", p.d},
                     {"tau1", p.tau1},   {"tau2", p.tau2}, {"dt", p.dt},
                     {"phi_ref", p.phi_ref}, {"N", p.N}};
}

void from_json(const nlohmann::json& j, DrivingParams& p) {
  const DrivingParams def;
  p.theta = j.value("theta", def.theta);
  p.c = j.value("c", def.c);
  p.d = j.value("d", def.d);
  p.tau1 = j.value("tau1", def.tau1);
  p.tau2 = j.value("tau2", def.tau2);
  p.dt = j.value("dt", def.dt);
  p.phi_ref = j.value("phi_ref", def.phi_ref);
  p.N = j.value("N", def.N);
}

void to_json(nlohmann::json& j, const ParamVectors& p) {
  j = nlohmann::json{{"s", vector_to_json(p.s)},
                     {"sigma", vector_to_json(p.sigma)}};
}

void from_json(const nlohmann::json& j, ParamVectors& p) {
  p.s = vector_from_json(j.at("s"));
  p.sigma = vector_from_json(j.at("sigma"));
}

}  // namespace lqsid
