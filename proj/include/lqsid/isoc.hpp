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

#ifndef LQSID_ISOC_HPP_
#define LQSID_ISOC_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lqsid/model.hpp"
#include "lqsid/moments.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {

// Variance accounted for: 1 - sum (p - m)^2 / sum (m - mean(m))^2.
// Throws InvalidArgument on length mismatch, fewer than two samples or a
// constant measured sequence.
double vaf_scalar(const std::vector<double>& predicted,
                  const std::vector<double>& measured);

// Weights over the selected output: w_m per mean channel, w_v over the
// column-major vectorized covariance (dim * dim entries).
struct VafWeights {
  Eigen::VectorXd w_m;
  Eigen::VectorXd w_v;

  int dim() const { return static_cast<int>(w_m.size()); }
  double total() const { return w_m.sum() + w_v.sum(); }
  bool has_covariance_weight() const { return (w_v.array() > 0.0).any(); }

  // Weights on the mean channels plus the given covariance diagonal.
  static VafWeights diagonal(const Eigen::VectorXd& w_m,
                             const Eigen::VectorXd& w_v_diag);
  void validate() const;
};

// Per-channel VAF values. Entries that were not evaluated are NaN.
struct VafBreakdown {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Evaluates every channel whose measured sequence is not constant.
VafBreakdown vaf_breakdown(const ObservedMoments& predicted,
                           const ObservedMoments& measured);

// Weighted VAF objective. Channels with zero weight are never evaluated.
double j_isoc(const ObservedMoments& predicted, const ObservedMoments& measured,
              const VafWeights& w);

// Same objective with the measured channels and denominators cached, for
// repeated evaluation against one measurement.
class VafObjective {
 public:
  VafObjective(const ObservedMoments& measured, const VafWeights& w);
  double operator()(const ObservedMoments& predicted) const;
  int horizon() const { return steps_ - 1; }

 private:
  struct Channel {
    int row = 0;
    int col = 0;  // -1 for a mean channel
    double weight = 0.0;
    double denom = 0.0;
    std::vector<double> values;
  };
  std::vector<Channel> channels_;
  double total_ = 0.0;
  int steps_ = 0;
};

// Identifies a single entry of the parameter vectors: "s1".."s4" or
// "sigma1".."sigma11" (one-based, as printed).
struct ParamRef {
  bool cost = true;
  int index = 0;  // zero-based

  static ParamRef parse(const std::string& name);
  std::string name() const;
  double get(const ParamVectors& p) const;
  void set(ParamVectors& p, double v) const;

  auto operator<=>(const ParamRef&) const = default;
};

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

struct IsocConfig {
  // Sets searched jointly. A set holds either cost or noise entries only;
  // the cost sets form the first step of every alternation, the noise sets
  // the second.
  std::vector<std::vector<ParamRef>> parameter_sets;
  std::map<ParamRef, Bounds> bounds;
  // Values of all entries that are not searched (s4 in particular), and the
  // starting point when `start_at_midpoint` is false.
  ParamVectors fixed;
  bool start_at_midpoint = true;
  int grid_points = 7;
  double shrink_factor = 0.5;
  int outer_iters = 5;
  double stall_tol = 1e-5;
  // The step ends when every grid width fell below this fraction of its
  // initial width, or after `stall_levels` consecutive grid sizes that
  // improved the objective by less than stall_tol.
  double min_width_ratio = 1e-4;
  int stall_levels = 3;
  // Additional random starting points inside the bounds (0 = single start).
  int extra_starts = 0;
  SolverOptions solver;

  std::vector<ParamRef> searched(bool cost) const;
  void validate() const;
};

// Default partition for the driving model: {s1,s2,s3}, {sigma8},
// {sigma9..sigma11}, {sigma1..sigma4}, {sigma5..sigma7}, with s4 = 1.
IsocConfig default_driving_isoc_config();

struct TraceEntry {
  int iteration = 0;  // alternation, one-based
  int step = 0;       // 1 = cost, 2 = noise
  int level = 0;      // grid size index within the step
  int set = 0;        // index into parameter_sets
  double j_isoc = 0.0;
  bool accepted = false;
};

struct IsocResult {
  ParamVectors params;
  // Objective under the cost-step and noise-step weights at the result.
  double j_isoc = -std::numeric_limits<double>::infinity();
  double j_isoc_noise = -std::numeric_limits<double>::infinity();
  VafBreakdown vaf;
  std::vector<TraceEntry> trace;
  int iterations = 0;
  int evaluations = 0;
  int failed_evaluations = 0;
  int start = 0;  // index of the winning start
};

struct GridSearchResult {
  Eigen::VectorXd best;
  double value = -std::numeric_limits<double>::infinity();
  int evaluated = 0;
  int failed = 0;
};

// Evaluates `objective` on the tensor grid spanned by `axes` (each sorted
// ascending) and returns the maximizer. A point whose evaluation throws
// NumericalError or returns a non-finite value scores -inf. Ties go to the
// lexicographically smallest point. Throws NumericalError when every point
// fails.
GridSearchResult grid_search_step(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::vector<std::vector<double>>& axes, int jobs = 1);

// `points` equally spaced values of width `width` centered at `center`,
// shifted to lie inside [lo, hi] and clipped when wider than it.
std::vector<double> grid_axis(double center, double width, double lo,
                              double hi, int points);

// Builds the forward problem for a parameter candidate.
using ProblemFactory = std::function<LqsProblem(const ParamVectors&)>;

// Alternating grid-search identification. Every objective evaluation
// synthesizes the gains, propagates the moments and compares M-projected
// moments against `measured`. Evaluations run on up to `jobs` threads and
// the result does not depend on their number.
IsocResult identify(const ProblemFactory& factory,
                    const ObservedMoments& measured, const Eigen::MatrixXd& M,
                    const IsocConfig& cfg, const VafWeights& w_cost,
                    const VafWeights& w_noise, std::uint64_t seed = 0,
                    int jobs = 1);

// Predicted M-projected moments of a parameter candidate.
ObservedMoments predict(const ProblemFactory& factory,
                        const ParamVectors& params, const Eigen::MatrixXd& M,
                        const SolverOptions& opts = {});

void to_json(nlohmann::json& j, const VafWeights& w);
void from_json(const nlohmann::json& j, VafWeights& w);
void to_json(nlohmann::json& j, const IsocConfig& c);
void from_json(const nlohmann::json& j, IsocConfig& c);
void to_json(nlohmann::json& j, const VafBreakdown& v);
void to_json(nlohmann::json& j, const IsocResult& r);

// CSV columns iteration,step,level,set,j_isoc,accepted.
void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace);

}  // namespace lqsid

#endif  // LQSID_ISOC_HPP_
