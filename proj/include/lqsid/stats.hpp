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

#ifndef LQSID_STATS_HPP_
#define LQSID_STATS_HPP_

#include <vector>

namespace lqsid {

// Regularized incomplete beta function I_x(a, b) for a, b > 0 and
// 0 <= x <= 1, evaluated with Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);

// P(F > f) for an F(d1, d2) variate.
double f_upper_tail(double f, double d1, double d2);

struct AnovaResult {
  double F = 0.0;
  double p = 1.0;
  double ssb = 0.0;
  double ssw = 0.0;
  int df_between = 0;
  int df_within = 0;
};

// One-way fixed-effects ANOVA. Needs at least two groups of at least two
// values each. Throws InvalidArgument when both sums of squares vanish.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups);

// Five-number summary with Tukey fences at 1.5 IQR. Quartiles use linear
// interpolation between order statistics.
struct BoxSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lower_fence = 0.0;
  double upper_fence = 0.0;
  double whisker_lo = 0.0;  // smallest value inside the fences
  double whisker_hi = 0.0;  // largest value inside the fences
  std::vector<int> outliers;  // indices into the input
};

double quantile(std::vector<double> values, double q);
BoxSummary box_summary(const std::vector<double>& values);

}  // namespace lqsid

#endif  // LQSID_STATS_HPP_
