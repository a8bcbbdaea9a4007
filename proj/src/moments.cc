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

#include "lqsid/moments.hpp"

#include <ostream>
#include <string>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"

namespace lqsid {
namespace {

// min eig(cov) >= -eps  <=>  cov + eps I is positive definite.
template <typename Mat>
void check_psd(const Mat& cov, int t) {
  const double eps = 1e-9 * std::max(1.0, cov.cwiseAbs().maxCoeff());
  Mat shifted = cov;
  shifted.diagonal().array() += eps;
  if (Eigen::LLT<Mat>(shifted).info() != Eigen::Success) {
    throw NumericalError("covariance lost positive semi-definiteness at t=" +
                         std::to_string(t));
  }
}

template <int NX, int NU, int NY>
MomentTrajectory propagate_impl(const LqsProblem& p, const GainSchedule& g) {
  using MatX = Eigen::Matrix<double, NX, NX>;
  using VecX = Eigen::Matrix<double, NX, 1>;
  using MatXU = Eigen::Matrix<double, NX, NU>;
  using MatUX = Eigen::Matrix<double, NU, NX>;
  using MatXY = Eigen::Matrix<double, NX, NY>;
  using MatYX = Eigen::Matrix<double, NY, NX>;
  using MatY = Eigen::Matrix<double, NY, NY>;
  constexpr int NZ = NX == Eigen::Dynamic ? Eigen::Dynamic : 2 * NX;
  using MatZ = Eigen::Matrix<double, NZ, NZ>;
  using VecZ = Eigen::Matrix<double, NZ, 1>;

  const int n = p.n();
  const MatX A = p.A;
  const MatXU B = p.B;
  const MatYX H = p.H;
  const MatX Oxi = p.process_noise_cov();
  const MatY Oomega = p.observation_noise_cov();
  std::vector<MatXU> Cs;
  for (const auto& C : p.control_noise_matrices()) Cs.push_back(C);
  std::vector<MatYX> Ds;
  for (const auto& D : p.state_noise_matrices()) Ds.push_back(D);

  MomentTrajectory mt;
  mt.n = n;
  mt.mean.reserve(p.N + 1);
  mt.cov.reserve(p.N + 1);

  if (p.fully_observed) {
    VecX mu = p.x0_mean;
    MatX S = p.x0_cov;
    auto push = [&](const VecX& m, const MatX& c) {
      Eigen::VectorXd z(2 * n);
      z << m, m;
      Eigen::MatrixXd Z(2 * n, 2 * n);
      Z << c, c, c, c;
      mt.mean.push_back(std::move(z));
      mt.cov.push_back(std::move(Z));
    };
    push(mu, S);
    for (int t = 0; t < p.N; ++t) {
      const MatUX L = g.L[t];
      MatX Acl = A;
      Acl.noalias() -= B * L;
      MatX S_next = Oxi;
      S_next.noalias() += Acl * S * Acl.transpose();
      if (!Cs.empty()) {
        const MatX second = S + mu * mu.transpose();
        for (const auto& C : Cs) {
          const MatX CL = C * L;
          S_next.noalias() += CL * second * CL.transpose();
        }
      }
      mu = Acl * mu;
      S = 0.5 * (S_next + S_next.transpose());
      if (!mu.allFinite() || !S.allFinite()) {
        throw NumericalError("moment propagation diverged at t=" +
                             std::to_string(t + 1));
      }
      push(mu, S);
      check_psd(S, t + 1);
    }
    return mt;
  }

  VecZ z(2 * n);
  z << p.x0_mean, p.x0_mean;
  MatZ Z = MatZ::Zero(2 * n, 2 * n);
  Z.topLeftCorner(n, n) = p.x0_cov;
  mt.mean.emplace_back(z);
  mt.cov.emplace_back(Z);

  MatZ Acal(2 * n, 2 * n);
  MatZ Z_next(2 * n, 2 * n);
  for (int t = 0; t < p.N; ++t) {
    const MatUX L = g.L[t];
    const MatXY K = g.K[t];
    const MatX BL = B * L;
    const MatX KH = K * H;
    Acal.topLeftCorner(n, n) = A;
    Acal.topRightCorner(n, n) = -BL;
    Acal.bottomLeftCorner(n, n) = KH;
    Acal.bottomRightCorner(n, n) = A - KH - BL;

    Z_next.noalias() = Acal * Z * Acal.transpose();
    // Additive and control-dependent noise enter x; observation and
    // state-dependent noise enter xhat through K.
    MatX top = Oxi;
    if (!Cs.empty()) {
      const VecX mhat = z.tail(n);
      const MatX second =
          Z.bottomRightCorner(n, n) + mhat * mhat.transpose();
      for (const auto& C : Cs) {
        const MatX CL = C * L;
        top.noalias() += CL * second * CL.transpose();
      }
    }
    MatX bottom = K * Oomega * K.transpose();
    if (!Ds.empty()) {
      const VecX mx = z.head(n);
      const MatX second = Z.topLeftCorner(n, n) + mx * mx.transpose();
      for (const auto& D : Ds) {
        const MatX KD = K * D;
        bottom.noalias() += KD * second * KD.transpose();
      }
    }
    Z_next.topLeftCorner(n, n) += top;
    Z_next.bottomRightCorner(n, n) += bottom;

    z = Acal * z;
    Z = 0.5 * (Z_next + Z_next.transpose());
    if (!z.allFinite() || !Z.allFinite()) {
      throw NumericalError("moment propagation diverged at t=" +
                           std::to_string(t + 1));
    }
    mt.mean.emplace_back(z);
    mt.cov.emplace_back(Z);
    check_psd(Z, t + 1);
  }
  return mt;
}

}  // namespace

MomentTrajectory propagate(const LqsProblem& prob, const GainSchedule& gains) {
  prob.validate();
  if (static_cast<int>(gains.L.size()) != prob.N ||
      static_cast<int>(gains.K.size()) != prob.N) {
    throw InvalidArgument("gain schedule length does not match horizon");
  }
  for (int t = 0; t < prob.N; ++t) {
    if (gains.L[t].rows() != prob.m() || gains.L[t].cols() != prob.n() ||
        gains.K[t].rows() != prob.n() || gains.K[t].cols() != prob.r()) {
      throw InvalidArgument("gain dimensions do not match the problem");
    }
  }
  if (prob.n() == 5 && prob.m() == 1 && prob.r() == 3) {
    return propagate_impl<5, 1, 3>(prob, gains);
  }
  return propagate_impl<Eigen::Dynamic, Eigen::Dynamic, Eigen::Dynamic>(
      prob, gains);
}

bool is_selection_matrix(const Eigen::MatrixXd& M) {
  if (M.rows() == 0 || M.rows() > M.cols()) return false;
  std::vector<bool> used(M.cols(), false);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    int ones = 0;
    Eigen::Index col = -1;
    for (Eigen::Index k = 0; k < M.cols(); ++k) {
      if (M(i, k) == 1.0) {
        ++ones;
        col = k;
      } else if (M(i, k) != 0.0) {
        return false;
      }
    }
    if (ones != 1 || used[col]) return false;
    used[col] = true;
  }
  return true;
}

ObservedMoments observed_moments(const MomentTrajectory& mt,
                                 const Eigen::MatrixXd& M) {
  if (M.cols() != mt.n || !is_selection_matrix(M)) {
    throw InvalidArgument("M must be a row selection of the " +
                          std::to_string(mt.n) + "-dimensional identity");
  }
  ObservedMoments out;
  out.mean.reserve(mt.mean.size());
  out.cov.reserve(mt.cov.size());
  for (std::size_t t = 0; t < mt.mean.size(); ++t) {
    out.mean.push_back(M * mt.mean[t].head(mt.n));
    out.cov.push_back(M * mt.cov[t].topLeftCorner(mt.n, mt.n) *
                      M.transpose());
  }
  return out;
}

void write_moments_csv(std::ostream& out, const MomentTrajectory& mt) {
  const int nz = 2 * mt.n;
  out << "t";
  for (int i = 0; i < mt.n; ++i) out << ",mean_x" << i + 1;
  for (int i = 0; i < mt.n; ++i) out << ",mean_xhat" << i + 1;
  for (int i = 0; i < nz; ++i) {
    for (int k = i; k < nz; ++k) out << ",cov_" << i + 1 << "_" << k + 1;
  }
  out << '\n';
  for (std::size_t t = 0; t < mt.mean.size(); ++t) {
    out << t;
    for (int i = 0; i < nz; ++i) out << ',' << format_double(mt.mean[t](i));
    for (int i = 0; i < nz; ++i) {
      for (int k = i; k < nz; ++k) {
        out << ',' << format_double(mt.cov[t](i, k));
      }
    }
    out << '\n';
  }
}

}  // namespace lqsid
