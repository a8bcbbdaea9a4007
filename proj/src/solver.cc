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

#include "lqsid/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"

namespace lqsid {
namespace {

// Dimension-generic kernel. Instantiated with fixed sizes for the driving
// model and with Eigen::Dynamic for everything else.
template <int NX, int NU, int NY>
class GainKernel {
 public:
  using MatX = Eigen::Matrix<double, NX, NX>;
  using MatXU = Eigen::Matrix<double, NX, NU>;
  using MatUX = Eigen::Matrix<double, NU, NX>;
  using MatU = Eigen::Matrix<double, NU, NU>;
  using MatYX = Eigen::Matrix<double, NY, NX>;
  using MatXY = Eigen::Matrix<double, NX, NY>;
  using MatY = Eigen::Matrix<double, NY, NY>;
  using VecX = Eigen::Matrix<double, NX, 1>;

  explicit GainKernel(const LqsProblem& p)
      : n_(p.n()),
        m_(p.m()),
        r_(p.r()),
        N_(p.N),
        fully_observed_(p.fully_observed),
        A_(p.A),
        B_(p.B),
        H_(p.H),
        Oxi_(p.process_noise_cov()),
        Oomega_(p.observation_noise_cov()),
        QN_(p.Q_N),
        Q_(p.Q),
        R_(p.R),
        x0_(p.x0_mean),
        S0_(p.x0_cov) {
    for (const auto& C : p.control_noise_matrices()) C_.push_back(C);
    for (const auto& D : p.state_noise_matrices()) D_.push_back(D);
  }

  // Control pass given estimator gains K (ignored when fully observed).
  void backward(const std::vector<MatXY>& K, std::vector<MatUX>& L,
                SolverWorkspace* ws) const {
    L.resize(N_);
    MatX Sx = QN_;
    MatX Se = MatX::Zero(n_, n_);
    if (ws) {
      ws->Zx.assign(N_ + 1, Eigen::MatrixXd());
      ws->Ze.assign(N_ + 1, Eigen::MatrixXd());
      ws->Zx[N_] = Sx;
      ws->Ze[N_] = Se;
    }
    MatU inner(m_, m_);
    MatXU SxB(n_, m_);
    MatX ABL(n_, n_), AKH(n_, n_), next(n_, n_);
    for (int t = N_ - 1; t >= 0; --t) {
      SxB.noalias() = Sx * B_;
      inner = R_;
      inner.noalias() += B_.transpose() * SxB;
      if (!C_.empty()) {
        const MatX Ssum = fully_observed_ ? Sx : MatX(Sx + Se);
        for (const auto& C : C_) inner.noalias() += C.transpose() * Ssum * C;
      }
      Eigen::LLT<MatU> llt(inner);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("control gain: inner matrix not positive "
                             "definite at t=" + std::to_string(t));
      }
      L[t].noalias() = llt.solve(SxB.transpose() * A_);

      ABL = A_;
      ABL.noalias() -= B_ * L[t];
      next = Q_;
      next.noalias() += A_.transpose() * Sx * ABL;
      if (fully_observed_) {
        Sx = 0.5 * (next + next.transpose());
      } else {
        const MatXY& Kt = K[t];
        for (const auto& D : D_) {
          const MatX KD = Kt * D;
          next.noalias() += KD.transpose() * Se * KD;
        }
        AKH = A_;
        AKH.noalias() -= Kt * H_;
        MatX Se_next = A_.transpose() * SxB * L[t];
        Se_next.noalias() += AKH.transpose() * Se * AKH;
        Sx = 0.5 * (next + next.transpose());
        Se = 0.5 * (Se_next + Se_next.transpose());
      }
      if (!Sx.allFinite() || !Se.allFinite()) {
        throw NumericalError("control pass produced non-finite cost-to-go");
      }
      if (ws) {
        ws->Zx[t] = Sx;
        ws->Ze[t] = Se;
      }
    }
  }

  // Estimation pass given control gains L.
  void forward(const std::vector<MatUX>& L, std::vector<MatXY>& K,
               SolverWorkspace* ws) const {
    K.resize(N_);
    MatX Pe = S0_;
    MatX Px = x0_ * x0_.transpose();
    MatX Pxe = MatX::Zero(n_, n_);
    if (ws) {
      ws->Pe.assign(N_ + 1, Eigen::MatrixXd());
      ws->Px.assign(N_ + 1, Eigen::MatrixXd());
      ws->Pxe.assign(N_ + 1, Eigen::MatrixXd());
      ws->Pe[0] = Pe;
      ws->Px[0] = Px;
      ws->Pxe[0] = Pxe;
    }
    MatY inner(r_, r_);
    MatXY PeHt(n_, r_);
    MatX ABL(n_, n_), AKH(n_, n_), second(n_, n_);
    MatX Pe_next(n_, n_), Px_next(n_, n_), Pxe_next(n_, n_);
    for (int t = 0; t < N_; ++t) {
      PeHt.noalias() = Pe * H_.transpose();
      inner = Oomega_;
      inner.noalias() += H_ * PeHt;
      if (!D_.empty()) {
        second = Pe + Px + Pxe + Pxe.transpose();
        for (const auto& D : D_) inner.noalias() += D * second * D.transpose();
      }
      Eigen::LLT<MatY> llt(inner);
      if (llt.info() != Eigen::Success) {
        throw NumericalError("estimator gain: inner matrix not positive "
                             "definite at t=" + std::to_string(t));
      }
      // K = A Pe H' inner^{-1}  <=>  K' = inner^{-1} H Pe A'
      K[t].noalias() = llt.solve(PeHt.transpose() * A_.transpose()).transpose();
      const MatXY& Kt = K[t];

      ABL = A_;
      ABL.noalias() -= B_ * L[t];
      AKH = A_;
      AKH.noalias() -= Kt * H_;

      Pe_next = Oxi_;
      Pe_next.noalias() += AKH * Pe * A_.transpose();
      for (const auto& C : C_) {
        const MatX CL = C * L[t];
        Pe_next.noalias() += CL * Px * CL.transpose();
      }

      const MatX KH = Kt * H_;
      Px_next.noalias() = KH * Pe * A_.transpose();
      Px_next.noalias() += ABL * Px * ABL.transpose();
      Px_next.noalias() += ABL * Pxe * KH.transpose();
      Px_next.noalias() += KH * Pxe.transpose() * ABL.transpose();

      Pxe_next.noalias() = ABL * Pxe * AKH.transpose();

      Pe = 0.5 * (Pe_next + Pe_next.transpose());
      Px = 0.5 * (Px_next + Px_next.transpose());
      Pxe = Pxe_next;
      if (!Pe.allFinite() || !Px.allFinite() || !Pxe.allFinite()) {
        throw NumericalError("estimation pass produced non-finite moments");
      }
      if (ws) {
        ws->Pe[t + 1] = Pe;
        ws->Px[t + 1] = Px;
        ws->Pxe[t + 1] = Pxe;
      }
    }
  }

  GainSchedule solve(const SolverOptions& opts, SolverWorkspace* ws) const {
    std::vector<MatUX> L;
    std::vector<MatXY> K(N_, MatXY::Zero(n_, r_));
    GainSchedule out;
    if (fully_observed_) {
      backward(K, L, ws);
      out.iterations = 1;
      out.converged = true;
      return pack(L, K, std::move(out));
    }
    std::vector<MatUX> L_prev;
    std::vector<MatXY> K_prev;
    for (int iter = 1; iter <= opts.max_outer_iters; ++iter) {
      backward(K, L, ws);
      forward(L, K, ws);
      out.iterations = iter;
      if (iter > 1) {
        double change = 0.0;
        for (int t = 0; t < N_; ++t) {
          change = std::max(change, (L[t] - L_prev[t]).cwiseAbs().maxCoeff());
          change = std::max(change, (K[t] - K_prev[t]).cwiseAbs().maxCoeff());
        }
        out.gain_change.push_back(change);
        if (change < opts.gain_tol) {
          out.converged = true;
          break;
        }
      }
      L_prev = L;
      K_prev = K;
    }
    if (ws) {
      // Keep the cost-to-go consistent with the returned estimator gains.
      backward(K, L_prev, ws);
    }
    return pack(L, K, std::move(out));
  }

 private:
  GainSchedule pack(const std::vector<MatUX>& L, const std::vector<MatXY>& K,
                    GainSchedule out) const {
    out.L.reserve(N_);
    out.K.reserve(N_);
    for (int t = 0; t < N_; ++t) {
      if (!L[t].allFinite() || !K[t].allFinite()) {
        throw NumericalError("non-finite gain at t=" + std::to_string(t));
      }
      out.L.emplace_back(L[t]);
      out.K.emplace_back(K[t]);
    }
    return out;
  }

  int n_, m_, r_, N_;
  bool fully_observed_;
  MatX A_;
  MatXU B_;
  MatYX H_;
  MatX Oxi_;
  MatY Oomega_;
  MatX QN_, Q_;
  MatU R_;
  VecX x0_;
  MatX S0_;
  std::vector<MatXU> C_;
  std::vector<MatYX> D_;
};

}  // namespace

void SolverOptions::validate() const {
  if (max_outer_iters < 1) {
    throw InvalidArgument("max_outer_iters must be >= 1");
  }
  if (!(gain_tol > 0)) throw InvalidArgument("gain_tol must be > 0");
}

GainSchedule synthesize(const LqsProblem& prob, const SolverOptions& opts,
                        SolverWorkspace* workspace) {
  prob.validate();
  opts.validate();
  if (prob.n() == 5 && prob.m() == 1 && prob.r() == 3) {
    return GainKernel<5, 1, 3>(prob).solve(opts, workspace);
  }
  if (prob.n() == 1 && prob.m() == 1 && prob.r() == 1) {
    return GainKernel<1, 1, 1>(prob).solve(opts, workspace);
  }
  using Dyn = GainKernel<Eigen::Dynamic, Eigen::Dynamic, Eigen::Dynamic>;
  return Dyn(prob).solve(opts, workspace);
}

GainSchedule synthesize_lq(const LqsProblem& prob) {
  if (prob.process_noise_cov().cwiseAbs().maxCoeff() != 0.0 ||
      prob.observation_noise_cov().cwiseAbs().maxCoeff() != 0.0 ||
      prob.has_signal_dependent_noise()) {
    throw InvalidArgument("synthesize_lq requires a noise-free problem");
  }
  LqsProblem full = prob;
  full.fully_observed = true;
  return synthesize(full);
}

void to_json(nlohmann::json& j, const GainSchedule& g) {
  nlohmann::json L = nlohmann::json::array();
  nlohmann::json K = nlohmann::json::array();
  for (const auto& m : g.L) L.push_back(matrix_to_json(m));
  for (const auto& m : g.K) K.push_back(matrix_to_json(m));
  j = nlohmann::json{{"L", L},
                     {"K", K},
                     {"iterations", g.iterations},
                     {"converged", g.converged},
                     {"gain_change", g.gain_change}};
}

}  // namespace lqsid
