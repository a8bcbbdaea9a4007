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

#include "lqsid/isoc.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <set>
#include <utility>

#include "lqsid/error.hpp"
#include "lqsid/io.hpp"
#include "lqsid/montecarlo.hpp"
#include "lqsid/parallel.hpp"

namespace lqsid {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxCyclesPerLevel = 50;

double centered_energy(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double e = 0.0;
  for (double x : v) e += (x - mean) * (x - mean);
  return e;
}

void check_aligned(const ObservedMoments& a, const ObservedMoments& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) {
    throw InvalidArgument("predicted and measured moments are not aligned");
  }
}

std::vector<double> mean_channel(const ObservedMoments& m, int i) {
  std::vector<double> v(m.size());
  for (int t = 0; t < m.size(); ++t) v[t] = m.mean[t](i);
  return v;
}

std::vector<double> cov_channel(const ObservedMoments& m, int i, int k) {
  std::vector<double> v(m.size());
  for (int t = 0; t < m.size(); ++t) v[t] = m.cov[t](i, k);
  return v;
}

// Index of the best value; the first maximum in enumeration order, which is
// the lexicographically smallest point for ascending axes.
int select_best(const std::vector<double>& values) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(values.size()); ++i) {
    if (values[i] == kNegInf) continue;
    if (best < 0 || values[i] > values[best]) best = i;
  }
  return best;
}

// Tensor grid in lexicographic order, last axis fastest.
std::vector<Eigen::VectorXd> enumerate_grid(
    const std::vector<std::vector<double>>& axes) {
  std::size_t total = 1;
  for (const auto& a : axes) total *= a.size();
  std::vector<Eigen::VectorXd> points;
  points.reserve(total);
  std::vector<std::size_t> idx(axes.size(), 0);
  for (std::size_t count = 0; count < total; ++count) {
    Eigen::VectorXd p(axes.size());
    for (std::size_t d = 0; d < axes.size(); ++d) p(d) = axes[d][idx[d]];
    points.push_back(std::move(p));
    for (std::size_t d = axes.size(); d-- > 0;) {
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
    }
  }
  return points;
}

std::vector<double> param_key(const ParamVectors& p) {
  std::vector<double> key(p.s.data(), p.s.data() + p.s.size());
  key.insert(key.end(), p.sigma.data(), p.sigma.data() + p.sigma.size());
  return key;
}

// Memoized, parallel evaluation of both step objectives.
class Evaluator {
 public:
  Evaluator(const ProblemFactory& factory, const ObservedMoments& measured,
            const Eigen::MatrixXd& M, const VafWeights& w_cost,
            const VafWeights& w_noise, const SolverOptions& opts, int jobs)
      : factory_(factory),
        M_(M),
        opts_(opts),
        jobs_(jobs),
        cost_(measured, w_cost),
        noise_(measured, w_noise) {}

  // Objective values (cost, noise) of every candidate.
  std::vector<std::pair<double, double>> evaluate(
      const std::vector<ParamVectors>& candidates) {
    std::vector<std::pair<double, double>> out(candidates.size());
    std::vector<int> missing;
    std::vector<std::vector<double>> keys(candidates.size());
    std::set<std::vector<double>> queued;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      keys[i] = param_key(candidates[i]);
      if (!memo_.count(keys[i]) && queued.insert(keys[i]).second) {
        missing.push_back(static_cast<int>(i));
      }
    }
    std::vector<std::pair<double, double>> fresh(missing.size());
    std::vector<char> failed(missing.size(), 0);
    parallel_for(static_cast<int>(missing.size()), jobs_, [&](int k) {
      try {
        const ObservedMoments pred =
            predict(factory_, candidates[missing[k]], M_, opts_);
        fresh[k] = {cost_(pred), noise_(pred)};
        if (!std::isfinite(fresh[k].first) ||
            !std::isfinite(fresh[k].second)) {
          fresh[k] = {kNegInf, kNegInf};
          failed[k] = 1;
        }
      } catch (const NumericalError&) {
        fresh[k] = {kNegInf, kNegInf};
        failed[k] = 1;
      }
    });
    for (std::size_t k = 0; k < missing.size(); ++k) {
      memo_[keys[missing[k]]] = fresh[k];
      ++evaluations_;
      failed_ += failed[k];
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) out[i] = memo_[keys[i]];
    return out;
  }

  std::pair<double, double> evaluate(const ParamVectors& p) {
    return evaluate(std::vector<ParamVectors>{p})[0];
  }

  int evaluations() const { return evaluations_; }
  int failed() const { return failed_; }

 private:
  const ProblemFactory& factory_;
  const Eigen::MatrixXd& M_;
  SolverOptions opts_;
  int jobs_;
  VafObjective cost_;
  VafObjective noise_;
  std::map<std::vector<double>, std::pair<double, double>> memo_;
  int evaluations_ = 0;
  int failed_ = 0;
};

struct StepState {
  ParamVectors params;
  double j_cost = kNegInf;
  double j_noise = kNegInf;
};

void run_step(const IsocConfig& cfg, bool cost_step, int iteration,
              Evaluator& eval, StepState& state,
              std::vector<TraceEntry>& trace) {
  std::vector<int> sets;
  for (int i = 0; i < static_cast<int>(cfg.parameter_sets.size()); ++i) {
    if (cfg.parameter_sets[i].front().cost == cost_step) sets.push_back(i);
  }
  if (sets.empty()) return;

  const std::vector<ParamRef> refs = cfg.searched(cost_step);
  std::map<ParamRef, double> width0, width;
  for (const auto& r : refs) {
    const Bounds& b = cfg.bounds.at(r);
    width0[r] = width[r] = b.hi - b.lo;
  }
  auto objective = [cost_step](const std::pair<double, double>& v) {
    return cost_step ? v.first : v.second;
  };

  double J = objective(eval.evaluate(state.params));
  int stalled = 0;
  for (int level = 0;; ++level) {
    const double level_start = J;
    for (int cycle = 0; cycle < kMaxCyclesPerLevel; ++cycle) {
      const double cycle_start = J;
      for (int s : sets) {
        const auto& set = cfg.parameter_sets[s];
        std::vector<std::vector<double>> axes;
        for (const auto& r : set) {
          const Bounds& b = cfg.bounds.at(r);
          axes.push_back(grid_axis(r.get(state.params), width[r], b.lo, b.hi,
                                   cfg.grid_points));
        }
        const auto points = enumerate_grid(axes);
        std::vector<ParamVectors> candidates(points.size(), state.params);
        for (std::size_t i = 0; i < points.size(); ++i) {
          for (std::size_t d = 0; d < set.size(); ++d) {
            set[d].set(candidates[i], points[i](d));
          }
        }
        const auto values = eval.evaluate(candidates);
        std::vector<double> scores(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) {
          scores[i] = objective(values[i]);
        }
        const int best = select_best(scores);
        if (best < 0 && J == kNegInf) {
          throw NumericalError("every grid point failed to evaluate");
        }
        const bool accepted = best >= 0 && scores[best] > J;
        if (accepted) {
          state.params = candidates[best];
          J = scores[best];
        }
        trace.push_back({iteration, cost_step ? 1 : 2, level, s, J, accepted});
      }
      if (!(J - cycle_start >= cfg.stall_tol)) break;
    }
    stalled = (J - level_start < cfg.stall_tol) ? stalled + 1 : 0;
    if (stalled >= cfg.stall_levels) break;
    bool all_small = true;
    for (const auto& r : refs) {
      width[r] *= cfg.shrink_factor;
      if (width[r] >= cfg.min_width_ratio * width0[r]) all_small = false;
    }
    if (all_small) break;
  }
  const auto final_values = eval.evaluate(state.params);
  state.j_cost = final_values.first;
  state.j_noise = final_values.second;
}

ParamVectors starting_point(const IsocConfig& cfg, int start,
                            std::uint64_t seed) {
  ParamVectors p = cfg.fixed;
  if (start == 0) {
    if (cfg.start_at_midpoint) {
      for (const auto& [r, b] : cfg.bounds) r.set(p, 0.5 * (b.lo + b.hi));
    }
    return p;
  }
  NormalStream rng(substream_seed(seed, static_cast<std::uint64_t>(start)));
  for (const auto& [r, b] : cfg.bounds) {
    r.set(p, b.lo + (b.hi - b.lo) * rng.uniform());
  }
  return p;
}

}  // namespace

double vaf_scalar(const std::vector<double>& predicted,
                  const std::vector<double>& measured) {
  if (predicted.size() != measured.size()) {
    throw InvalidArgument("vaf: sequences differ in length");
  }
  if (measured.size() < 2) throw InvalidArgument("vaf: need two samples");
  const double denom = centered_energy(measured);
  if (!(denom > 0.0)) {
    throw InvalidArgument("vaf: measured sequence is constant");
  }
  double num = 0.0;
  for (std::size_t i = 0; i < measured.size(); ++i) {
    const double e = predicted[i] - measured[i];
    num += e * e;
  }
  return 1.0 - num / denom;
}

VafWeights VafWeights::diagonal(const Eigen::VectorXd& w_m,
                                const Eigen::VectorXd& w_v_diag) {
  const Eigen::Index d = w_m.size();
  if (w_v_diag.size() != d) {
    throw InvalidArgument("weights: diagonal length differs from w_m");
  }
  VafWeights w;
  w.w_m = w_m;
  w.w_v = Eigen::VectorXd::Zero(d * d);
  for (Eigen::Index i = 0; i < d; ++i) w.w_v(i * d + i) = w_v_diag(i);
  return w;
}

void VafWeights::validate() const {
  const Eigen::Index d = w_m.size();
  if (d == 0) throw InvalidArgument("weights: empty w_m");
  if (w_v.size() != d * d) {
    throw InvalidArgument("weights: w_v must have dim*dim entries");
  }
  if (!w_m.allFinite() || !w_v.allFinite() || (w_m.array() < 0.0).any() ||
      (w_v.array() < 0.0).any()) {
    throw InvalidArgument("weights: entries must be finite and >= 0");
  }
  if (!(total() > 0.0)) throw InvalidArgument("weights: all zero");
}

VafBreakdown vaf_breakdown(const ObservedMoments& predicted,
                           const ObservedMoments& measured) {
  check_aligned(predicted, measured);
  const int d = measured.dim();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  VafBreakdown out;
  out.mean = Eigen::VectorXd::Constant(d, nan);
  out.cov = Eigen::MatrixXd::Constant(d, d, nan);
  for (int i = 0; i < d; ++i) {
    const auto meas = mean_channel(measured, i);
    if (centered_energy(meas) > 0.0) {
      out.mean(i) = vaf_scalar(mean_channel(predicted, i), meas);
    }
    for (int k = 0; k < d; ++k) {
      const auto mc = cov_channel(measured, i, k);
      if (centered_energy(mc) > 0.0) {
        out.cov(i, k) = vaf_scalar(cov_channel(predicted, i, k), mc);
      }
    }
  }
  return out;
}

double j_isoc(const ObservedMoments& predicted, const ObservedMoments& measured,
              const VafWeights& w) {
  return VafObjective(measured, w)(predicted);
}

VafObjective::VafObjective(const ObservedMoments& measured,
                           const VafWeights& w) {
  w.validate();
  const int d = measured.dim();
  if (w.dim() != d) {
    throw InvalidArgument("weights do not match the moment dimension");
  }
  if (measured.size() < 2) throw InvalidArgument("vaf: need two samples");
  steps_ = measured.size();
  total_ = w.total();
  for (int i = 0; i < d; ++i) {
    if (w.w_m(i) > 0.0) {
      Channel c{i, -1, w.w_m(i), 0.0, mean_channel(measured, i)};
      channels_.push_back(std::move(c));
    }
  }
  for (int k = 0; k < d; ++k) {
    for (int i = 0; i < d; ++i) {
      const double wv = w.w_v(k * d + i);
      if (wv > 0.0) {
        Channel c{i, k, wv, 0.0, cov_channel(measured, i, k)};
        channels_.push_back(std::move(c));
      }
    }
  }
  for (auto& c : channels_) {
    c.denom = centered_energy(c.values);
    if (!(c.denom > 0.0)) {
      throw InvalidArgument("vaf: weighted measured channel is constant");
    }
  }
}

double VafObjective::operator()(const ObservedMoments& predicted) const {
  if (predicted.size() != steps_) {
    throw InvalidArgument("predicted and measured moments are not aligned");
  }
  double acc = 0.0;
  for (const auto& c : channels_) {
    double num = 0.0;
    for (int t = 0; t < steps_; ++t) {
      const double p = c.col < 0 ? predicted.mean[t](c.row)
                                 : predicted.cov[t](c.row, c.col);
      const double e = p - c.values[t];
      num += e * e;
    }
    acc += c.weight * (1.0 - num / c.denom);
  }
  return acc / total_;
}

ParamRef ParamRef::parse(const std::string& name) {
  ParamRef r;
  std::string_view digits;
  if (name.rfind("sigma", 0) == 0) {
    r.cost = false;
    digits = std::string_view(name).substr(5);
  } else if (name.rfind("s", 0) == 0) {
    digits = std::string_view(name).substr(1);
  } else {
    throw InvalidArgument("unknown parameter name: " + name);
  }
  int one_based = 0;
  const auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), one_based);
  const int limit = r.cost ? ParamVectors::kCostSize : ParamVectors::kNoiseSize;
  if (ec != std::errc() || ptr != digits.data() + digits.size() ||
      one_based < 1 || one_based > limit) {
    throw InvalidArgument("unknown parameter name: " + name);
  }
  r.index = one_based - 1;
  return r;
}

std::string ParamRef::name() const {
  return (cost ? "s" : "sigma") + std::to_string(index + 1);
}

double ParamRef::get(const ParamVectors& p) const {
  return cost ? p.s(index) : p.sigma(index);
}

void ParamRef::set(ParamVectors& p, double v) const {
  (cost ? p.s(index) : p.sigma(index)) = v;
}

std::vector<ParamRef> IsocConfig::searched(bool cost) const {
  std::set<ParamRef> out;
  for (const auto& set : parameter_sets) {
    for (const auto& r : set) {
      if (r.cost == cost) out.insert(r);
    }
  }
  return {out.begin(), out.end()};
}

void IsocConfig::validate() const {
  fixed.validate();
  if (grid_points < 2) throw InvalidArgument("isoc: grid_points must be >= 2");
  if (!(shrink_factor > 0.0 && shrink_factor < 1.0)) {
    throw InvalidArgument("isoc: shrink_factor must lie in (0, 1)");
  }
  if (outer_iters < 1) throw InvalidArgument("isoc: outer_iters must be >= 1");
  if (!(stall_tol >= 0.0)) throw InvalidArgument("isoc: stall_tol < 0");
  if (!(min_width_ratio > 0.0 && min_width_ratio < 1.0)) {
    throw InvalidArgument("isoc: min_width_ratio must lie in (0, 1)");
  }
  if (stall_levels < 1) throw InvalidArgument("isoc: stall_levels must be >= 1");
  if (extra_starts < 0) throw InvalidArgument("isoc: extra_starts < 0");
  solver.validate();
  std::set<ParamRef> seen;
  for (const auto& set : parameter_sets) {
    if (set.empty()) throw InvalidArgument("isoc: empty parameter set");
    for (const auto& r : set) {
      if (r.cost != set.front().cost) {
        throw InvalidArgument("isoc: a set mixes cost and noise parameters");
      }
      if (!bounds.count(r)) {
        throw InvalidArgument("isoc: no bounds for " + r.name());
      }
      seen.insert(r);
    }
  }
  for (const auto& [r, b] : bounds) {
    if (!seen.count(r)) {
      throw InvalidArgument("isoc: " + r.name() + " has bounds but no set");
    }
    if (!(std::isfinite(b.lo) && std::isfinite(b.hi) && b.lo >= 0.0 &&
          b.lo <= b.hi)) {
      throw InvalidArgument("isoc: invalid bounds for " + r.name());
    }
    if (r.cost && r.index == ParamVectors::kCostSize - 1 && b.lo <= 0.0) {
      throw InvalidArgument("isoc: s4 must stay positive");
    }
  }
}

IsocConfig default_driving_isoc_config() {
  IsocConfig c;
  auto refs = [](std::initializer_list<const char*> names) {
    std::vector<ParamRef> out;
    for (const char* n : names) out.push_back(ParamRef::parse(n));
    return out;
  };
  c.parameter_sets = {refs({"s1", "s2", "s3"}),
                      refs({"sigma8"}),
                      refs({"sigma9", "sigma10", "sigma11"}),
                      refs({"sigma1", "sigma2", "sigma3", "sigma4"}),
                      refs({"sigma5", "sigma6", "sigma7"})};
  const std::pair<const char*, double> upper[] = {
      {"s1", 3e5},      {"s2", 5e3},       {"s3", 500.0},     {"sigma1", 0.01},
      {"sigma2", 0.05}, {"sigma3", 0.01},  {"sigma4", 0.01},  {"sigma5", 0.05},
      {"sigma6", 0.2},  {"sigma7", 0.05},  {"sigma8", 1.0},   {"sigma9", 0.2},
      {"sigma10", 0.2}, {"sigma11", 0.2}};
  for (const auto& [name, hi] : upper) c.bounds[ParamRef::parse(name)] = {0.0, hi};
  c.fixed.s(3) = 1.0;
  return c;
}

std::vector<double> grid_axis(double center, double width, double lo,
                              double hi, int points) {
  if (points < 2) throw InvalidArgument("grid: need at least two points");
  if (!(lo <= hi) || !(width >= 0.0)) throw InvalidArgument("grid: bad range");
  width = std::min(width, hi - lo);
  double a = center - 0.5 * width;
  if (a < lo) a = lo;
  if (a + width > hi) a = hi - width;
  std::vector<double> axis(points);
  for (int k = 0; k < points; ++k) {
    axis[k] = k == points - 1 ? a + width
                              : a + width * static_cast<double>(k) / (points - 1);
  }
  // Degenerate widths collapse onto one value.
  axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  return axis;
}

GridSearchResult grid_search_step(
    const std::function<double(const Eigen::VectorXd&)>& objective,
    const std::vector<std::vector<double>>& axes, int jobs) {
  if (axes.empty()) throw InvalidArgument("grid: no axes");
  for (const auto& a : axes) {
    if (a.empty()) throw InvalidArgument("grid: empty axis");
    if (!std::is_sorted(a.begin(), a.end())) {
      throw InvalidArgument("grid: axis not ascending");
    }
  }
  const auto points = enumerate_grid(axes);
  std::vector<double> values(points.size(), kNegInf);
  parallel_for(static_cast<int>(points.size()), jobs, [&](int i) {
    try {
      const double v = objective(points[i]);
      if (std::isfinite(v)) values[i] = v;
    } catch (const NumericalError&) {
    }
  });
  GridSearchResult out;
  out.evaluated = static_cast<int>(points.size());
  out.failed = static_cast<int>(std::count(values.begin(), values.end(), kNegInf));
  const int best = select_best(values);
  if (best < 0) throw NumericalError("every grid point failed to evaluate");
  out.best = points[best];
  out.value = values[best];
  return out;
}

ObservedMoments predict(const ProblemFactory& factory,
                        const ParamVectors& params, const Eigen::MatrixXd& M,
                        const SolverOptions& opts) {
  const LqsProblem prob = factory(params);
  const GainSchedule gains = synthesize(prob, opts);
  return observed_moments(propagate(prob, gains), M);
}

IsocResult identify(const ProblemFactory& factory,
                    const ObservedMoments& measured, const Eigen::MatrixXd& M,
                    const IsocConfig& cfg, const VafWeights& w_cost,
                    const VafWeights& w_noise, std::uint64_t seed, int jobs) {
  cfg.validate();
  if (cfg.parameter_sets.empty()) throw InvalidArgument("isoc: no parameter sets");
  Evaluator eval(factory, measured, M, w_cost, w_noise, cfg.solver, jobs);

  IsocResult best;
  for (int start = 0; start <= cfg.extra_starts; ++start) {
    StepState state;
    state.params = starting_point(cfg, start, seed);
    std::vector<TraceEntry> trace;
    int iterations = 0;
    for (int l = 1; l <= cfg.outer_iters; ++l) {
      const ParamVectors before = state.params;
      run_step(cfg, true, l, eval, state, trace);
      run_step(cfg, false, l, eval, state, trace);
      iterations = l;
      if (param_key(before) == param_key(state.params)) break;
    }
    if (state.j_cost == kNegInf) {
      throw NumericalError("identification found no feasible parameters");
    }
    if (start == 0 || state.j_cost > best.j_isoc) {
      best.params = state.params;
      best.j_isoc = state.j_cost;
      best.j_isoc_noise = state.j_noise;
      best.trace = std::move(trace);
      best.iterations = iterations;
      best.start = start;
    }
  }
  best.vaf = vaf_breakdown(predict(factory, best.params, M, cfg.solver),
                           measured);
  best.evaluations = eval.evaluations();
  best.failed_evaluations = eval.failed();
  return best;
}

void to_json(nlohmann::json& j, const VafWeights& w) {
  j = nlohmann::json{{"w_m", vector_to_json(w.w_m)},
                     {"w_v", vector_to_json(w.w_v)}};
}

void from_json(const nlohmann::json& j, VafWeights& w) {
  w.w_m = vector_from_json(j.at("w_m"));
  const Eigen::VectorXd wv = vector_from_json(j.at("w_v"));
  const Eigen::Index d = w.w_m.size();
  if (wv.size() == d && d > 1) {
    w = VafWeights::diagonal(w.w_m, wv);
  } else {
    w.w_v = wv;
  }
  w.validate();
}

void to_json(nlohmann::json& j, const IsocConfig& c) {
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& set : c.parameter_sets) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto& r : set) names.push_back(r.name());
    sets.push_back(names);
  }
  nlohmann::json bounds = nlohmann::json::object();
  for (const auto& [r, b] : c.bounds) bounds[r.name()] = {b.lo, b.hi};
  j = nlohmann::json{{"parameter_sets", sets},
                     {"bounds", bounds},
                     {"fixed", c.fixed},
                     {"start_at_midpoint", c.start_at_midpoint},
                     {"grid_points", c.grid_points},
                     {"shrink_factor", c.shrink_factor},
                     {"outer_iters", c.outer_iters},
                     {"stall_tol", c.stall_tol},
                     {"min_width_ratio", c.min_width_ratio},
                     {"stall_levels", c.stall_levels},
                     {"extra_starts", c.extra_starts},
                     {"max_solver_iters", c.solver.max_outer_iters},
                     {"solver_gain_tol", c.solver.gain_tol}};
}

void from_json(const nlohmann::json& j, IsocConfig& c) {
  const IsocConfig def = default_driving_isoc_config();
  if (j.contains("parameter_sets")) {
    c.parameter_sets.clear();
    for (const auto& set : j.at("parameter_sets")) {
      std::vector<ParamRef> refs;
      for (const auto& name : set) {
        refs.push_back(ParamRef::parse(name.get<std::string>()));
      }
      c.parameter_sets.push_back(std::move(refs));
    }
  } else {
    c.parameter_sets = def.parameter_sets;
  }
  c.bounds = def.bounds;
  if (j.contains("bounds")) {
    for (const auto& [name, b] : j.at("bounds").items()) {
      if (!b.is_array() || b.size() != 2) {
        throw InvalidArgument("isoc: bounds for " + name + " must be [lo, hi]");
      }
      c.bounds[ParamRef::parse(name)] = {b[0].get<double>(), b[1].get<double>()};
    }
  }
  // Bounds of parameters that are not searched are irrelevant.
  std::set<ParamRef> used;
  for (const auto& set : c.parameter_sets) used.insert(set.begin(), set.end());
  std::erase_if(c.bounds, [&](const auto& kv) { return !used.count(kv.first); });

  c.fixed = def.fixed;
  if (j.contains("fixed")) {
    const auto& f = j.at("fixed");
    if (f.contains("s")) c.fixed.s = vector_from_json(f.at("s"));
    if (f.contains("sigma")) c.fixed.sigma = vector_from_json(f.at("sigma"));
  }
  c.start_at_midpoint = j.value("start_at_midpoint", def.start_at_midpoint);
  c.grid_points = j.value("grid_points", def.grid_points);
  c.shrink_factor = j.value("shrink_factor", def.shrink_factor);
  c.outer_iters = j.value("outer_iters", def.outer_iters);
  c.stall_tol = j.value("stall_tol", def.stall_tol);
  c.min_width_ratio = j.value("min_width_ratio", def.min_width_ratio);
  c.stall_levels = j.value("stall_levels", def.stall_levels);
  c.extra_starts = j.value("extra_starts", def.extra_starts);
  c.solver.max_outer_iters =
      j.value("max_solver_iters", def.solver.max_outer_iters);
  c.solver.gain_tol = j.value("solver_gain_tol", def.solver.gain_tol);
  c.validate();
}

void to_json(nlohmann::json& j, const VafBreakdown& v) {
  auto num = [](double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  nlohmann::json mean = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.mean.size(); ++i) mean.push_back(num(v.mean(i)));
  nlohmann::json cov = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.cov.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index k = 0; k < v.cov.cols(); ++k) row.push_back(num(v.cov(i, k)));
    cov.push_back(row);
  }
  j = nlohmann::json{{"mean", mean}, {"cov", cov}};
}

void to_json(nlohmann::json& j, const IsocResult& r) {
  j = nlohmann::json{{"params", r.params},
                     {"j_isoc", r.j_isoc},
                     {"j_isoc_noise", r.j_isoc_noise},
                     {"vaf", r.vaf},
                     {"iterations", r.iterations},
                     {"evaluations", r.evaluations},
                     {"failed_evaluations", r.failed_evaluations},
                     {"start", r.start}};
}

void write_trace_csv(std::ostream& out, const std::vector<TraceEntry>& trace) {
  out << "iteration,step,level,set,j_isoc,accepted\n";
  for (const auto& e : trace) {
    out << e.iteration << ',' << e.step << ',' << e.level << ',' << e.set << ','
        << format_double(e.j_isoc) << ',' << (e.accepted ? 1 : 0) << '\n';
  }
}

}  // namespace lqsid
