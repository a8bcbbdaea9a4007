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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "lqsid/error.hpp"
#include "lqsid/isoc.hpp"
#include "lqsid/model.hpp"
#include "lqsid/moments.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {
namespace {

ObservedMoments two_channel(const std::vector<double>& phi,
                            const std::vector<double>& vel,
                            const std::vector<double>& var_phi) {
  ObservedMoments m;
  for (std::size_t t = 0; t < phi.size(); ++t) {
    m.mean.push_back(Eigen::Vector2d(phi[t], vel[t]));
    Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
    c(0, 0) = var_phi[t];
    m.cov.push_back(c);
  }
  return m;
}

VafWeights default_cost_weights() {
  return VafWeights::diagonal(Eigen::Vector2d(0.9, 0.9), Eigen::Vector2d(0.1, 0.0));
}

TEST(VafScalar, HandComputedValues) {
  EXPECT_EQ(vaf_scalar({1, 2, 3}, {1, 2, 3}), 1.0);
  EXPECT_EQ(vaf_scalar({2, 2, 2}, {1, 2, 3}), 0.0);
  EXPECT_NEAR(vaf_scalar({1, 2, 4}, {1, 2, 3}), 0.5, 1e-12);
  EXPECT_LT(vaf_scalar({30, -20, 50}, {1, 2, 3}), -100.0);
}

TEST(VafScalar, RejectsUndefinedInputs) {
  EXPECT_THROW(vaf_scalar({1, 2, 3}, {2, 2, 2}), InvalidArgument);
  EXPECT_THROW(vaf_scalar({1, 2}, {1, 2, 3}), InvalidArgument);
  EXPECT_THROW(vaf_scalar({1}, {1}), InvalidArgument);
}

TEST(JIsoc, PerfectFitIsOne) {
  const ObservedMoments m = two_channel({0, 1, 2}, {1, 3, 2}, {0.1, 0.3, 0.2});
  EXPECT_EQ(j_isoc(m, m, default_cost_weights()), 1.0);
}

TEST(JIsoc, DefaultWeightsWithFailedVarianceChannel) {
  const ObservedMoments meas = two_channel({0, 1, 2}, {1, 3, 2}, {1, 2, 3});
  // Variance prediction equal to the measured mean: VAF exactly 0.
  const ObservedMoments pred = two_channel({0, 1, 2}, {1, 3, 2}, {2, 2, 2});
  EXPECT_NEAR(j_isoc(pred, meas, default_cost_weights()), 1.8 / 1.9, 1e-12);
}

TEST(JIsoc, GrosslyWrongPredictionIsNegative) {
  const ObservedMoments meas = two_channel({0, 1, 2}, {1, 3, 2}, {1, 2, 3});
  const ObservedMoments pred = two_channel({50, -40, 90}, {1, 3, 2}, {1, 2, 3});
  EXPECT_LT(j_isoc(pred, meas, default_cost_weights()), 0.0);
}

TEST(JIsoc, UnweightedConstantChannelsAreSkipped) {
  // var phi_dot and the cross covariance are constant; they carry no weight.
  const ObservedMoments meas = two_channel({0, 1, 2}, {1, 3, 2}, {1, 2, 3});
  const ObservedMoments pred = two_channel({0, 1, 2.5}, {1, 3, 2}, {1, 2, 3});
  const double expected = (0.9 * vaf_scalar({0, 1, 2.5}, {0, 1, 2}) + 0.9 + 0.1) / 1.9;
  EXPECT_NEAR(j_isoc(pred, meas, default_cost_weights()), expected, 1e-12);

  VafWeights w = default_cost_weights();
  w.w_v(3) = 0.5;  // weight on the constant var phi_dot channel
  EXPECT_THROW(j_isoc(pred, meas, w), InvalidArgument);
}

TEST(JIsoc, CovarianceWeightsAreColumnMajor) {
  ObservedMoments meas = two_channel({0, 1, 2}, {1, 3, 2}, {1, 1, 1});
  for (int t = 0; t < 3; ++t) meas.cov[t](1, 0) = meas.cov[t](0, 1) = t;
  ObservedMoments pred = meas;
  for (int t = 0; t < 3; ++t) pred.cov[t](1, 0) = pred.cov[t](0, 1) = 1.0;
  VafWeights w;
  w.w_m = Eigen::Vector2d(0.0, 0.0);
  w.w_v = Eigen::Vector4d(0.0, 1.0, 0.0, 0.0);  // entry (1, 0)
  EXPECT_NEAR(j_isoc(pred, meas, w), 0.0, 1e-12);
}

TEST(JIsoc, CachedObjectiveAgrees) {
  const ObservedMoments meas = two_channel({0, 1, 2, 2.5}, {1, 3, 2, 0}, {1, 2, 3, 3});
  const ObservedMoments pred = two_channel({0, 1.1, 2, 2.4}, {1, 2.5, 2, 0.2}, {1, 2.5, 2, 3});
  const VafWeights w = VafWeights::diagonal(Eigen::Vector2d(0.1, 0.1), Eigen::Vector2d(0.9, 0.0));
  const VafObjective obj(meas, w);
  EXPECT_NEAR(obj(pred), j_isoc(pred, meas, w), 1e-15);
  EXPECT_EQ(obj.horizon(), 3);
}

TEST(VafBreakdown, MarksConstantChannelsNaN) {
  const ObservedMoments meas = two_channel({0, 1, 2}, {1, 3, 2}, {1, 2, 3});
  const VafBreakdown b = vaf_breakdown(meas, meas);
  EXPECT_EQ(b.mean(0), 1.0);
  EXPECT_EQ(b.cov(0, 0), 1.0);
  EXPECT_TRUE(std::isnan(b.cov(1, 1)));
}

TEST(VafWeights, DefaultWeightsValidate) {
  EXPECT_NO_THROW(default_cost_weights().validate());
  const VafWeights noise =
      VafWeights::diagonal(Eigen::Vector2d(0.1, 0.1), Eigen::Vector2d(0.9, 0.0));
  EXPECT_NO_THROW(noise.validate());
  EXPECT_EQ(noise.w_v.size(), 4);
  EXPECT_EQ(noise.w_v(0), 0.9);
  EXPECT_TRUE(noise.has_covariance_weight());

  VafWeights bad = noise;
  bad.w_m(0) = -0.1;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = noise;
  bad.w_v = Eigen::Vector3d::Zero();
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad.w_m.setZero();
  bad.w_v = Eigen::Vector4d::Zero();
  EXPECT_THROW(bad.validate(), InvalidArgument);

  const nlohmann::json j = {{"w_m", {0.9, 0.9}}, {"w_v", {0.1, 0.0}}};
  const VafWeights parsed = j.get<VafWeights>();
  EXPECT_EQ(parsed.w_v, default_cost_weights().w_v);
  const VafWeights again = nlohmann::json(parsed).get<VafWeights>();
  EXPECT_EQ(again.w_v, parsed.w_v);
}

TEST(GridSearch, PicksExactGridMaximum) {
  const auto r = grid_search_step(
      [](const Eigen::VectorXd& p) { return -std::pow(p(0) - 0.3, 2); },
      {{0.1, 0.2, 0.3, 0.4}});
  EXPECT_DOUBLE_EQ(r.best(0), 0.3);
  EXPECT_EQ(r.evaluated, 4);
}

TEST(GridSearch, TiesGoToSmallestPoint) {
  const auto r = grid_search_step([](const Eigen::VectorXd&) { return 1.0; },
                                  {{0.1, 0.2, 0.3}, {5.0, 6.0}});
  EXPECT_DOUBLE_EQ(r.best(0), 0.1);
  EXPECT_DOUBLE_EQ(r.best(1), 5.0);
}

TEST(GridSearch, SeparableObjectiveGivesAxisMaximizers) {
  const std::vector<std::vector<double>> axes = {{0, 1, 2, 3, 4}, {-1, 0, 1, 2}};
  const auto f = [](const Eigen::VectorXd& p) {
    return -std::pow(p(0) - 3, 2) - std::abs(p(1) - 0);
  };
  const auto r1 = grid_search_step(f, axes, 1);
  const auto r3 = grid_search_step(f, axes, 3);
  EXPECT_EQ(r1.best, Eigen::Vector2d(3, 0));
  EXPECT_EQ(r3.best, r1.best);
  EXPECT_EQ(r1.evaluated, 20);
}

TEST(GridSearch, FailedPointsAreSkipped) {
  const auto f = [](const Eigen::VectorXd& p) {
    if (p(0) > 0.25) throw NumericalError("diverged");
    if (p(0) < 0.15) return std::numeric_limits<double>::quiet_NaN();
    return p(0);
  };
  const auto r = grid_search_step(f, {{0.1, 0.2, 0.3, 0.4}});
  EXPECT_DOUBLE_EQ(r.best(0), 0.2);
  EXPECT_EQ(r.failed, 3);
  EXPECT_THROW(grid_search_step([](const Eigen::VectorXd&) -> double {
                 throw NumericalError("always");
               }, {{0.1, 0.2}}),
               NumericalError);
}

TEST(GridAxis, CentersShiftsAndClips) {
  auto a = grid_axis(0.5, 0.4, 0.0, 1.0, 5);
  ASSERT_EQ(a.size(), 5u);
  EXPECT_NEAR(a.front(), 0.3, 1e-15);
  EXPECT_NEAR(a.back(), 0.7, 1e-15);
  a = grid_axis(0.05, 0.4, 0.0, 1.0, 5);
  EXPECT_DOUBLE_EQ(a.front(), 0.0);
  EXPECT_NEAR(a.back(), 0.4, 1e-15);
  a = grid_axis(0.5, 3.0, 0.0, 1.0, 3);
  EXPECT_DOUBLE_EQ(a.front(), 0.0);
  EXPECT_DOUBLE_EQ(a.back(), 1.0);
  EXPECT_THROW(grid_axis(0.5, 0.1, 0.0, 1.0, 1), InvalidArgument);
}

TEST(ParamRef, ParsesPrintedNames) {
  const ParamRef s1 = ParamRef::parse("s1");
  EXPECT_TRUE(s1.cost);
  EXPECT_EQ(s1.index, 0);
  const ParamRef g11 = ParamRef::parse("sigma11");
  EXPECT_FALSE(g11.cost);
  EXPECT_EQ(g11.index, 10);
  EXPECT_EQ(g11.name(), "sigma11");
  ParamVectors p;
  g11.set(p, 0.25);
  EXPECT_EQ(p.sigma(10), 0.25);
  EXPECT_EQ(g11.get(p), 0.25);
  EXPECT_THROW(ParamRef::parse("s5"), InvalidArgument);
  EXPECT_THROW(ParamRef::parse("sigma0"), InvalidArgument);
  EXPECT_THROW(ParamRef::parse("tau"), InvalidArgument);
}

TEST(IsocConfig, DefaultValidatesAndRoundTrips) {
  const IsocConfig c = default_driving_isoc_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.parameter_sets.size(), 5u);
  EXPECT_EQ(c.fixed.s(3), 1.0);
  EXPECT_EQ(c.searched(true).size(), 3u);
  EXPECT_EQ(c.searched(false).size(), 11u);
  const IsocConfig d = nlohmann::json(c).get<IsocConfig>();
  EXPECT_EQ(nlohmann::json(d).dump(), nlohmann::json(c).dump());
}

TEST(IsocConfig, RejectsInvalidSetups) {
  IsocConfig c = default_driving_isoc_config();
  c.grid_points = 1;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_driving_isoc_config();
  c.parameter_sets[0].push_back(ParamRef::parse("sigma1"));
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_driving_isoc_config();
  c.bounds[ParamRef::parse("s1")] = {5.0, 1.0};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_driving_isoc_config();
  c.bounds[ParamRef::parse("sigma1")] = {-1.0, 1.0};
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = default_driving_isoc_config();
  c.shrink_factor = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

// Driving problem whose moments serve as the measurement.
struct Synthetic {
  ParamVectors truth;
  ProblemFactory factory;
  ObservedMoments measured;
  Eigen::MatrixXd M = leading_selection(2, 5);
};

Synthetic make_synthetic(bool lq) {
  Synthetic s;
  s.truth.s << 1e5, 1e3, 100, 1;
  if (!lq) {
    s.truth.sigma << 1e-3, 3e-3, 1e-3, 1e-3, 1e-2, 5e-2, 1e-2, 0.3, 0, 0, 0;
  }
  s.factory = [lq](const ParamVectors& p) {
    LqsProblem prob = build_driving_problem({}, p);
    set_driving_initial_state(prob, {}, Eigen::Vector2d::Zero(),
                              Eigen::Matrix2d::Identity() * 1e-6);
    return lq ? reduce_to_lq(prob) : prob;
  };
  s.measured = predict(s.factory, s.truth, s.M);
  return s;
}

TEST(Identify, LqRecoversNoiselessMeans) {
  const Synthetic syn = make_synthetic(true);
  IsocConfig cfg;
  cfg.parameter_sets = {{ParamRef::parse("s1"), ParamRef::parse("s2"),
                         ParamRef::parse("s3")}};
  cfg.bounds[ParamRef::parse("s1")] = {0, 3e5};
  cfg.bounds[ParamRef::parse("s2")] = {0, 5e3};
  cfg.bounds[ParamRef::parse("s3")] = {0, 500};
  cfg.fixed.s(3) = 1.0;
  cfg.grid_points = 5;
  cfg.outer_iters = 1;
  const VafWeights w = VafWeights::diagonal(Eigen::Vector2d(0.9, 0.9),
                                            Eigen::Vector2d(0.0, 0.0));
  const IsocResult r = identify(syn.factory, syn.measured, syn.M, cfg, w, w);
  EXPECT_GE(r.j_isoc, 0.999);
  EXPECT_GE(r.vaf.mean(0), 0.999);
  EXPECT_GE(r.vaf.mean(1), 0.999);
  EXPECT_EQ(r.params.sigma, Eigen::VectorXd::Zero(11));
}

TEST(Identify, LqsSelfConsistencyAndDeterminism) {
  const Synthetic syn = make_synthetic(false);
  IsocConfig cfg = default_driving_isoc_config();
  cfg.parameter_sets = {{ParamRef::parse("s1"), ParamRef::parse("s2"),
                         ParamRef::parse("s3")},
                        {ParamRef::parse("sigma8")}};
  std::map<ParamRef, Bounds> kept;
  for (const auto& set : cfg.parameter_sets) {
    for (const auto& r : set) kept[r] = cfg.bounds.at(r);
  }
  cfg.bounds = kept;
  cfg.fixed.sigma = syn.truth.sigma;
  cfg.fixed.sigma(7) = 0.0;
  cfg.grid_points = 5;
  cfg.outer_iters = 2;
  const VafWeights w_cost =
      VafWeights::diagonal(Eigen::Vector2d(0.9, 0.9), Eigen::Vector2d(0.1, 0.0));
  const VafWeights w_noise =
      VafWeights::diagonal(Eigen::Vector2d(0.1, 0.1), Eigen::Vector2d(0.9, 0.0));
  const IsocResult a = identify(syn.factory, syn.measured, syn.M, cfg, w_cost, w_noise, 1, 1);
  EXPECT_GE(a.j_isoc, 0.99);
  EXPECT_GT(a.evaluations, 0);
  EXPECT_EQ(a.iterations, 2);
  ASSERT_FALSE(a.trace.empty());

  // Accepted objective values never decrease within one step.
  double last = -std::numeric_limits<double>::infinity();
  int step = 0, iteration = 0;
  for (const TraceEntry& e : a.trace) {
    if (e.step != step || e.iteration != iteration) {
      last = -std::numeric_limits<double>::infinity();
      step = e.step;
      iteration = e.iteration;
    }
    if (e.accepted) {
      EXPECT_GE(e.j_isoc, last);
      last = e.j_isoc;
    }
  }

  const IsocResult b = identify(syn.factory, syn.measured, syn.M, cfg, w_cost, w_noise, 1, 2);
  EXPECT_EQ(a.params.s, b.params.s);
  EXPECT_EQ(a.params.sigma, b.params.sigma);
  EXPECT_EQ(a.j_isoc, b.j_isoc);
}

TEST(Identify, PredictReproducesTruth) {
  const Synthetic syn = make_synthetic(false);
  const ObservedMoments again = predict(syn.factory, syn.truth, syn.M);
  const VafWeights w =
      VafWeights::diagonal(Eigen::Vector2d(0.9, 0.9), Eigen::Vector2d(0.1, 0.0));
  EXPECT_EQ(j_isoc(again, syn.measured, w), 1.0);
}

}  // namespace
}  // namespace lqsid
