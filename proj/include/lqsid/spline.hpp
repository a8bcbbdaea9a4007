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

#ifndef LQSID_SPLINE_HPP_
#define LQSID_SPLINE_HPP_

#include <optional>
#include <vector>

namespace lqsid {

// Natural cubic smoothing spline minimizing
//
//   sum_i (y_i - f(x_i))^2 + alpha * integral f''(x)^2 dx
//
// in Reinsch form. The fit is described by its knot values and second
// derivatives, from which values and slopes at the knots follow directly.
struct SmoothingSpline {
  std::vector<double> x;
  std::vector<double> value;   // f(x_i)
  std::vector<double> second;  // f''(x_i), zero at both ends
  double alpha = 0.0;
  double gcv = 0.0;            // score at alpha
  double dof = 0.0;            // trace of the influence matrix

  // f'(x_i) at every knot.
  std::vector<double> slopes() const;
};

// Fits the spline for a fixed alpha >= 0, or picks alpha by minimizing the
// generalized cross-validation score when `alpha` is empty. Requires at
// least four strictly increasing abscissae.
SmoothingSpline fit_smoothing_spline(const std::vector<double>& x,
                                     const std::vector<double>& y,
                                     std::optional<double> alpha = {});

}  // namespace lqsid

#endif  // LQSID_SPLINE_HPP_
