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

#include "lqsid/montecarlo.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"
#include "lqsid/parallel.hpp"

namespace lqsid {

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double NormalStream::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double NormalStream::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

namespace {

// F with F F' = cov for a positive semi-definite cov. Pivoted LDL' keeps
// structurally zero rows exactly zero.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& cov) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(cov);
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd L = ldlt.matrixL();
  Eigen::MatrixXd F = ldlt.transpositionsP().transpose() * (L * d.asDiagonal());
  return F;
}

void fill_normal(NormalStream& rng, Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.next();
}

}  // namespace

ClosedLoopStepper::ClosedLoopStepper(const LqsProblem& prob)
    : prob_(prob),
      Cs_(prob.control_noise_matrices()),
      Ds_(prob.state_noise_matrices()),
      alpha_(prob.sigma_xi.cols()),
      beta_(prob.sigma_omega.cols()),
      u_(prob.m()),
      y_(prob.r()),
      x_next_(prob.n()) {}

void ClosedLoopStepper::step(const Eigen::MatrixXd& L, const Eigen::MatrixXd& K,
                             NormalStream& rng, Eigen::VectorXd& x,
                             Eigen::VectorXd& xhat) {
  const LqsProblem& p = prob_;
  if (p.fully_observed) xhat = x;
  u_.noalias() = -L * xhat;
  x_next_.noalias() = p.A * x + p.B * u_;
  if (alpha_.size() > 0) {
    fill_normal(rng, alpha_);
    x_next_.noalias() += p.sigma_xi * alpha_;
  }
  for (const auto& C : Cs_) x_next_.noalias() += rng.next() * (C * u_);
  if (!p.fully_observed) {
    y_.noalias() = p.H * x;
    if (beta_.size() > 0) {
      fill_normal(rng, beta_);
      y_.noalias() += p.sigma_omega * beta_;
    }
    for (const auto& D : Ds_) y_.noalias() += rng.next() * (D * x);
    y_.noalias() -= p.H * xhat;
    xhat = p.A * xhat + p.B * u_;
    xhat.noalias() += K * y_;
  }
  x = x_next_;
}

RolloutBatch rollout(const LqsProblem& prob, const GainSchedule& gains, int K,
                     std::uint64_t seed, int jobs) {
  prob.validate();
  if (K < 1) throw InvalidArgument("rollout count K must be >= 1");
  if (static_cast<int>(gains.L.size()) != prob.N ||
      static_cast<int>(gains.K.size()) != prob.N) {
    throw InvalidArgument("gain schedule length does not match horizon");
  }
  const int n = prob.n();
  const int N = prob.N;
  RolloutBatch batch;
  batch.K = K;
  batch.N = N;
  batch.n = n;
  batch.seed = seed;
  batch.data.assign(static_cast<std::size_t>(K) * (N + 1) * n, 0.0);

  const Eigen::MatrixXd F0 = psd_factor(prob.x0_cov);
  parallel_for(K, jobs, [&](int k) {
    NormalStream rng(substream_seed(seed, static_cast<std::uint64_t>(k)));
    ClosedLoopStepper stepper(prob);
    Eigen::VectorXd w0(n), x(n), xhat(n);
    fill_normal(rng, w0);
    x = prob.x0_mean + F0 * w0;
    xhat = prob.x0_mean;
    double* out = batch.data.data() + static_cast<std::size_t>(k) * (N + 1) * n;
    Eigen::Map<Eigen::VectorXd>(out, n) = x;
    for (int t = 0; t < N; ++t) {
      stepper.step(gains.L[t], gains.K[t], rng, x, xhat);
      if (!x.allFinite()) {
        throw NumericalError("rollout diverged at t=" + std::to_string(t + 1));
      }
      Eigen::Map<Eigen::VectorXd>(out + static_cast<std::size_t>(t + 1) * n,
                                  n) = x;
    }
  });
  return batch;
}

namespace {

void check_selection(const RolloutBatch& batch, const Eigen::MatrixXd& M) {
  if (M.cols() != batch.n || !is_selection_matrix(M)) {
    throw InvalidArgument("M must be a row selection of the state");
  }
}

}  // namespace

ObservedMoments sample_moments(const RolloutBatch& batch,
                               const Eigen::MatrixXd& M) {
  check_selection(batch, M);
  if (batch.K < 2) {
    throw InvalidArgument("sample covariance needs at least 2 rollouts");
  }
  const Eigen::Index k_out = M.rows();
  ObservedMoments out;
  for (int t = 0; t <= batch.N; ++t) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(k_out);
    for (int k = 0; k < batch.K; ++k) mean.noalias() += M * batch.state(k, t);
    mean /= batch.K;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(k_out, k_out);
    for (int k = 0; k < batch.K; ++k) {
      const Eigen::VectorXd d = M * batch.state(k, t) - mean;
      cov.noalias() += d * d.transpose();
    }
    cov /= (batch.K - 1);
    out.mean.push_back(std::move(mean));
    out.cov.push_back(std::move(cov));
  }
  return out;
}

ObservedMoments sample_moment_standard_errors(const RolloutBatch& batch,
                                              const Eigen::MatrixXd& M) {
  const ObservedMoments mom = sample_moments(batch, M);
  const Eigen::Index k_out = M.rows();
  const double K = batch.K;
  ObservedMoments se;
  for (int t = 0; t <= batch.N; ++t) {
    se.mean.push_back((mom.cov[t].diagonal() / K).cwiseSqrt());
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(k_out, k_out);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(k_out, k_out);
    for (int k = 0; k < batch.K; ++k) {
      const Eigen::VectorXd d = M * batch.state(k, t) - mom.mean[t];
      const Eigen::MatrixXd w = d * d.transpose();
      sum += w;
      sum_sq += w.cwiseProduct(w);
    }
    const Eigen::MatrixXd mean_w = sum / K;
    const Eigen::MatrixXd var_w =
        (sum_sq / K - mean_w.cwiseProduct(mean_w)) * (K / (K - 1));
    se.cov.push_back((var_w.cwiseMax(0.0) / K).cwiseSqrt());
  }
  return se;
}

void write_rollouts(const std::filesystem::path& dir, const RolloutBatch& batch,
                    const LqsProblem& prob, const Eigen::MatrixXd& M,
                    double dt) {
  check_selection(batch, M);
  std::vector<int> selected;
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Eigen::Index col = 0;
    M.row(i).maxCoeff(&col);
    selected.push_back(static_cast<int>(col));
  }
  nlohmann::json files = nlohmann::json::array();
  for (int k = 0; k < batch.K; ++k) {
    CsvTable table;
    table.header.push_back("time_s");
    for (int idx : selected) table.header.push_back("x" + std::to_string(idx + 1));
    for (int t = 0; t <= batch.N; ++t) {
      std::vector<double> row{t * dt};
      for (int idx : selected) row.push_back(batch.at(k, t, idx));
      table.rows.push_back(std::move(row));
    }
    char name[32];
    std::snprintf(name, sizeof(name), "rollout_%05d.csv", k);
    write_csv(dir / name, table);
    files.push_back(name);
  }
  const std::string problem_text = nlohmann::json(prob).dump();
  nlohmann::json manifest{{"seed", batch.seed},
                          {"K", batch.K},
                          {"N", batch.N},
                          {"dt", dt},
                          {"selected_states", selected},
                          {"problem_hash", hex64(fnv1a64(problem_text))},
                          {"files", files}};
  write_json(dir / "manifest.json", manifest);
}

}  // namespace lqsid
