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

#include "lqsid/spline.hpp"

#include <cmath>
#include <limits>

#include "lqsid/error.hpp"

namespace lqsid {
namespace {

// Symmetric pentadiagonal matrix by its diagonal and two super-diagonals.
struct Band {
  std::vector<double> d0, d1, d2;
};

// Reinsch-form matrices for knots with spacings h. Column c of Q has the
// entries (a_c, b_c, e_c) in rows c, c+1, c+2.
class ReinschSystem {
 public:
  ReinschSystem(const std::vector<double>& x, const std::vector<double>& y)
      : n_(static_cast<int>(x.size())), m_(n_ - 2), y_(y) {
    std::vector<double> h(n_ - 1);
    for (int i = 0; i + 1 < n_; ++i) h[i] = x[i + 1] - x[i];
    a_.resize(m_);
    b_.resize(m_);
    e_.resize(m_);
    R_.d0.assign(m_, 0.0);
    R_.d1.assign(m_, 0.0);
    R_.d2.assign(m_, 0.0);
    for (int c = 0; c < m_; ++c) {
      a_[c] = 1.0 / h[c];
      e_[c] = 1.0 / h[c + 1];
      b_[c] = -a_[c] - e_[c];
      R_.d0[c] = (h[c] + h[c + 1]) / 3.0;
      if (c + 1 < m_) R_.d1[c] = h[c + 1] / 6.0;
    }
    QtQ_.d0.assign(m_, 0.0);
    QtQ_.d1.assign(m_, 0.0);
    QtQ_.d2.assign(m_, 0.0);
    Qty_.assign(m_, 0.0);
    for (int c = 0; c < m_; ++c) {
      QtQ_.d0[c] = a_[c] * a_[c] + b_[c] * b_[c] + e_[c] * e_[c];
      if (c + 1 < m_) QtQ_.d1[c] = b_[c] * a_[c + 1] + e_[c] * b_[c + 1];
      if (c + 2 < m_) QtQ_.d2[c] = e_[c] * a_[c + 2];
      Qty_[c] = a_[c] * y[c] + b_[c] * y[c + 1] + e_[c] * y[c + 2];
    }
  }

  // Fits for one alpha; fills values, second derivatives, RSS and dof.
  void fit(double alpha, SmoothingSpline& out, double& rss) const {
    // LDL' of B = R + alpha Q'Q; L unit lower with two sub-diagonals.
    std::vector<double> D(m_), l1(m_, 0.0), l2(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      const double b0 = R_.d0[i] + alpha * QtQ_.d0[i];
      const double b1 = R_.d1[i] + alpha * QtQ_.d1[i];
      const double b2 = R_.d2[i] + alpha * QtQ_.d2[i];
      double di = b0;
      if (i >= 1) di -= l1[i - 1] * l1[i - 1] * D[i - 1];
      if (i >= 2) di -= l2[i - 2] * l2[i - 2] * D[i - 2];
      if (!(di > 0.0)) throw NumericalError("spline: system not positive definite");
      D[i] = di;
      double c1 = b1;
      if (i >= 1) c1 -= l1[i - 1] * l2[i - 1] * D[i - 1];
      l1[i] = c1 / di;
      l2[i] = b2 / di;
    }
    std::vector<double> z(Qty_);
    for (int i = 0; i < m_; ++i) {
      if (i >= 1) z[i] -= l1[i - 1] * z[i - 1];
      if (i >= 2) z[i] -= l2[i - 2] * z[i - 2];
    }
    for (int i = 0; i < m_; ++i) z[i] /= D[i];
    for (int i = m_ - 1; i >= 0; --i) {
      if (i + 1 < m_) z[i] -= l1[i] * z[i + 1];
      if (i + 2 < m_) z[i] -= l2[i] * z[i + 2];
    }
    const std::vector<double>& gamma = z;

    out.value.assign(n_, 0.0);
    rss = 0.0;
    for (int i = 0; i < n_; ++i) {
      double qg = 0.0;
      if (i < m_) qg += a_[i] * gamma[i];
      if (i >= 1 && i - 1 < m_) qg += b_[i - 1] * gamma[i - 1];
      if (i >= 2 && i - 2 < m_) qg += e_[i - 2] * gamma[i - 2];
      const double r = alpha * qg;
      out.value[i] = y_[i] - r;
      rss += r * r;
    }
    out.second.assign(n_, 0.0);
    for (int c = 0; c < m_; ++c) out.second[c + 1] = gamma[c];

    // Band of B^{-1} from the LDL' factors, then trace(B^{-1} Q'Q).
    std::vector<double> s0(m_ + 2, 0.0), s1(m_ + 2, 0.0), s2(m_ + 2, 0.0);
    for (int i = m_ - 1; i >= 0; --i) {
      s2[i] = -l1[i] * s1[i + 1] - l2[i] * s0[i + 2];
      s1[i] = -l1[i] * s0[i + 1] - l2[i] * s1[i + 1];
      s0[i] = 1.0 / D[i] - l1[i] * s1[i] - l2[i] * s2[i];
    }
    double tr = 0.0;
    for (int i = 0; i < m_; ++i) {
      tr += s0[i] * QtQ_.d0[i] + 2.0 * s1[i] * QtQ_.d1[i] +
            2.0 * s2[i] * QtQ_.d2[i];
    }
    out.alpha = alpha;
    out.dof = n_ - alpha * tr;
    const double denom = (n_ - out.dof) / n_;
    out.gcv = denom > 0.0 ? (rss / n_) / (denom * denom)
                          : std::numeric_limits<double>::infinity();
  }

  int size() const { return n_; }

 private:
  int n_, m_;
  std::vector<double> y_;
  std::vector<double> a_, b_, e_;
  Band R_, QtQ_;
  std::vector<double> Qty_;
};

}  // namespace

std::vector<double> SmoothingSpline::slopes() const {
  const std::size_t n = x.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double h = x[i + 1] - x[i];
    d[i] = (value[i + 1] - value[i]) / h -
           h * (2.0 * second[i] + second[i + 1]) / 6.0;
  }
  const double h = x[n - 1] - x[n - 2];
  d[n - 1] = (value[n - 1] - value[n - 2]) / h +
             h * (second[n - 2] + 2.0 * second[n - 1]) / 6.0;
  return d;
}

SmoothingSpline fit_smoothing_spline(const std::vector<double>& x,
                                     const std::vector<double>& y,
                                     std::optional<double> alpha) {
  if (x.size() != y.size()) throw InvalidArgument("spline: length mismatch");
  if (x.size() < 4) throw InvalidArgument("spline: need at least four samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw InvalidArgument("spline: non-finite sample");
    }
    if (i > 0 && !(x[i] > x[i - 1])) {
      throw InvalidArgument("spline: abscissae must be strictly increasing");
    }
  }
  const ReinschSystem sys(x, y);
  SmoothingSpline out;
  out.x = x;
  double rss = 0.0;
  if (alpha) {
    if (!(*alpha >= 0.0)) throw InvalidArgument("spline: alpha must be >= 0");
    sys.fit(*alpha, out, rss);
    return out;
  }

  // Coarse scan of log10(alpha / h^3), then golden-section refinement.
  const double h = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  const double scale = h * h * h;
  auto score = [&](double u) {
    SmoothingSpline s;
    double r = 0.0;
    sys.fit(scale * std::pow(10.0, u), s, r);
    return s.gcv;
  };
  constexpr double kLo = -8.0, kHi = 12.0, kStep = 0.5;
  double best_u = kLo;
  double best = std::numeric_limits<double>::infinity();
  for (double u = kLo; u <= kHi + 1e-12; u += kStep) {
    const double g = score(u);
    if (g < best) {
      best = g;
      best_u = u;
    }
  }
  double lo = std::max(kLo, best_u - kStep);
  double hi = std::min(kHi, best_u + kStep);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - phi * (hi - lo), d = lo + phi * (hi - lo);
  double fc = score(c), fd = score(d);
  while (hi - lo > 1e-3) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - phi * (hi - lo);
      fc = score(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + phi * (hi - lo);
      fd = score(d);
    }
  }
  const double u = fc <= fd ? c : d;
  const double u_final = std::min(fc, fd) <= best ? u : best_u;
  sys.fit(scale * std::pow(10.0, u_final), out, rss);
  return out;
}

}  // namespace lqsid
