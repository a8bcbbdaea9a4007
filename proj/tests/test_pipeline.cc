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
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lqsid/error.hpp"
#include "lqsid/model.hpp"
#include "lqsid/moments.hpp"
#include "lqsid/montecarlo.hpp"
#include "lqsid/pipeline.hpp"
#include "lqsid/solver.hpp"

namespace lqsid {
namespace {

namespace fs = std::filesystem;

using fixture::fixture_session;
using fixture::kPlateau;
using fixture::kRamp;
using fixture::RepSpec;
constexpr double kTarget = fixture::kStepTarget;

TEST(Segmentation, CleanResponsesHaveKnownBoundaries) {
  const RawSession s = fixture_session({{0}, {5}, {-3}});
  const SegmentationResult r = segment_movements(s, 1);
  ASSERT_EQ(r.segments.size(), 3u);
  EXPECT_TRUE(r.dropped_steps.empty());
  const int steps[] = {100, 500, 900};
  const int starts[] = {99, 499, 897};
  const int ends[] = {140, 545, 937};
  for (int k = 0; k < 3; ++k) {
    const Segment& seg = r.segments[k];
    EXPECT_EQ(seg.step_index, steps[k]);
    EXPECT_EQ(seg.start, starts[k]);
    ASSERT_TRUE(seg.end.has_value());
    EXPECT_EQ(*seg.end, ends[k]);
    EXPECT_DOUBLE_EQ(seg.threshold, 0.1);
    EXPECT_DOUBLE_EQ(seg.target, kTarget);
    EXPECT_EQ(static_cast<int>(seg.angle.size()), steps[k] + kPlateau - starts[k]);
  }
  std::vector<int> durations;
  for (const auto& seg : r.segments) durations.push_back(*seg.duration());
  EXPECT_EQ(durations, (std::vector<int>{41, 46, 40}));
  EXPECT_EQ(average_duration(durations), 42);

  const SegmentationResult again = segment_movements(s, 1);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(again.segments[k].start, r.segments[k].start);
    EXPECT_EQ(again.segments[k].end, r.segments[k].end);
  }
}

TEST(Segmentation, NegativeStepsMirrorPositiveOnes) {
  const RawSession s = fixture_session({{0}, {2}});
  const SegmentationResult r = segment_movements(s, -1);
  ASSERT_EQ(r.segments.size(), 2u);
  EXPECT_EQ(r.segments[0].step_index, 300);
  EXPECT_EQ(r.segments[0].start, 299);
  EXPECT_EQ(*r.segments[0].end, 340);
  EXPECT_EQ(*r.segments[1].end, 742);
  EXPECT_DOUBLE_EQ(r.segments[1].target, -kTarget);
}

TEST(Segmentation, ThresholdRelaxation) {
  const RawSession s = fixture_session({{0, 0.05}, {0, 0.245}, {0, 0.395}});
  const SegmentationResult r = segment_movements(s, 1);
  ASSERT_EQ(r.segments.size(), 3u);
  // A floor below the strict threshold never needs relaxing.
  EXPECT_DOUBLE_EQ(r.segments[0].threshold, 0.1);
  EXPECT_NEAR(r.segments[1].threshold, 0.25, 1e-12);
  EXPECT_NEAR(r.segments[2].threshold, 0.4, 1e-12);
  for (const auto& seg : r.segments) EXPECT_EQ(seg.start, seg.step_index - 1);
}

TEST(Segmentation, RestlessRepetitionIsDropped) {
  const RawSession s = fixture_session({{0}, {0, 0.5}, {0}});
  const SegmentationResult r = segment_movements(s, 1);
  ASSERT_EQ(r.segments.size(), 2u);
  EXPECT_EQ(r.dropped_steps, (std::vector<int>{500}));
  EXPECT_EQ(r.segments[1].step_index, 900);
}

TEST(Segmentation, UnsettledRepetitionKeptWithoutDuration) {
  const RawSession s = fixture_session({{0}, {0, 0.0, 0.9}, {0}});
  const SegmentationResult r = segment_movements(s, 1);
  ASSERT_EQ(r.segments.size(), 3u);
  EXPECT_FALSE(r.segments[1].end.has_value());
  EXPECT_FALSE(r.segments[1].duration().has_value());
}

TEST(Segmentation, RequiresVelocityAndValidSign) {
  RawSession s = fixture_session({{0}});
  EXPECT_THROW(segment_movements(s, 0), InvalidArgument);
  s.velocity.clear();
  EXPECT_THROW(segment_movements(s, 1), InvalidArgument);
}

Segment constant_segment(std::vector<double> angle, std::vector<double> velocity) {
  Segment s;
  s.angle = std::move(angle);
  s.velocity = std::move(velocity);
  s.target = kTarget;
  return s;
}

TEST(EnsembleMoments, HandComputedPairAndAlignment) {
  const Segment a = constant_segment({0, 0, 0}, {1, 1, 1});
  const Segment b = constant_segment({2, 2}, {3, 3});
  const TrialEnsemble e = ensemble_moments({a, b}, 4);
  EXPECT_EQ(e.N, 4);
  ASSERT_EQ(e.moments.size(), 5);
  for (int t = 0; t <= 4; ++t) {
    EXPECT_DOUBLE_EQ(e.moments.mean[t](0), 1.0);
    EXPECT_DOUBLE_EQ(e.moments.mean[t](1), 2.0);
    EXPECT_DOUBLE_EQ(e.moments.cov[t](0, 0), 2.0);
    EXPECT_DOUBLE_EQ(e.moments.cov[t](0, 1), 2.0);
  }
  // Held at the last sample beyond its length.
  EXPECT_EQ(e.trials[1](4, 0), 2.0);
}

TEST(EnsembleMoments, IdenticalSegmentsHaveZeroCovariance) {
  const Segment a = constant_segment({0, 0.5, 1.0, 1.2}, {5, 4, 1, 0});
  const TrialEnsemble e = ensemble_moments({a, a, a}, 2);
  for (const auto& c : e.moments.cov) EXPECT_TRUE(c.isZero(0.0));
  EXPECT_DOUBLE_EQ(e.moments.mean[2](0), 1.0);  // truncated at N
}

TEST(EnsembleMoments, MeanIsPointwiseAverage) {
  std::vector<Segment> segs;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 14; ++k) {
    std::vector<double> a(10), v(10);
    for (int t = 0; t < 10; ++t) a[t] = nd(rng), v[t] = nd(rng);
    segs.push_back(constant_segment(a, v));
  }
  const TrialEnsemble e = ensemble_moments(segs, 9);
  for (int t = 0; t <= 9; ++t) {
    double m = 0.0;
    for (const auto& s : segs) m += s.angle[t];
    EXPECT_NEAR(e.moments.mean[t](0), m / 14, 1e-14);
  }
  EXPECT_THROW(ensemble_moments({segs[0]}, 5), InvalidArgument);
}

TEST(EnsembleMoments, SampleMeansAreUnbiased) {
  ParamVectors pv;
  pv.s << 1e5, 1e3, 100, 1;
  pv.sigma << 1e-3, 3e-3, 1e-3, 1e-3, 1e-2, 5e-2, 1e-2, 0.3, 0, 0, 0;
  LqsProblem p = build_driving_problem({}, pv);
  const GainSchedule g = synthesize(p);
  const MomentTrajectory mt = propagate(p, g);
  const int regenerations = 100, K = 14;
  std::vector<Eigen::Vector2d> avg(p.N + 1, Eigen::Vector2d::Zero());
  for (int r = 0; r < regenerations; ++r) {
    const RolloutBatch b = rollout(p, g, K, 1000 + r);
    std::vector<Segment> segs;
    for (int k = 0; k < K; ++k) {
      Segment s;
      for (int t = 0; t <= p.N; ++t) {
        s.angle.push_back(b.at(k, t, kPhi));
        s.velocity.push_back(b.at(k, t, kPhiDot));
      }
      segs.push_back(std::move(s));
    }
    const TrialEnsemble e = ensemble_moments(segs, p.N);
    for (int t = 0; t <= p.N; ++t) avg[t] += e.moments.mean[t] / regenerations;
  }
  int violations = 0;
  for (int t = 1; t <= p.N; ++t) {
    const Eigen::MatrixXd c = mt.state_cov(t);
    for (int i = 0; i < 2; ++i) {
      const double se = std::sqrt(c(i, i) / (K * regenerations));
      violations += std::abs(avg[t](i) - mt.state_mean(t)(i)) > 4 * se;
    }
  }
  EXPECT_EQ(violations, 0);
}

TEST(KinematicFeatures, TriangleProfile) {
  std::vector<double> v;
  for (int i = 0; i <= 20; ++i) v.push_back(i <= 10 ? i : 20 - i);
  const KinematicFeatures f = kinematic_features(v);
  EXPECT_EQ(f.peaks, 1);
  EXPECT_NEAR(f.max_to_mean, 2.0, 1e-12);
  EXPECT_NEAR(f.skewness, 0.0, 1e-12);
}

TEST(KinematicFeatures, ConstantProfile) {
  const KinematicFeatures f = kinematic_features(std::vector<double>(30, 0.7));
  EXPECT_EQ(f.peaks, 0);
  EXPECT_NEAR(f.max_to_mean, 1.0, 1e-12);
}

TEST(KinematicFeatures, SmallRipplesBelowTenPercentIgnored) {
  std::vector<double> v;
  for (int i = 0; i <= 20; ++i) v.push_back(i <= 10 ? i : 20 - i);
  v.push_back(0.5);
  v.push_back(0.0);
  EXPECT_EQ(kinematic_features(v).peaks, 1);
  v[21] = 2.0;
  EXPECT_EQ(kinematic_features(v).peaks, 2);
}

TEST(Smoothing, LinearRampIsKept) {
  RawSession s;
  for (int i = 0; i < 200; ++i) {
    s.time.push_back(i * 0.01);
    s.angle.push_back(i * 0.01);
    s.reference.push_back(0.0);
  }
  const RawSession out = smooth_and_differentiate(s);
  for (int i = 0; i < 200; ++i) {
    EXPECT_NEAR(out.angle[i], s.angle[i], 1e-8);
    EXPECT_NEAR(out.velocity[i], 1.0, 1e-8);
  }
  s.angle.assign(200, -0.4);
  for (double v : smooth_and_differentiate(s).velocity) EXPECT_NEAR(v, 0.0, 1e-10);
}

TEST(Smoothing, NoisyRampGetsCloserToTruth) {
  std::mt19937_64 rng(2026);
  std::normal_distribution<double> nd(0.0, 1e-3);
  RawSession s;
  for (int i = 0; i < 300; ++i) {
    s.time.push_back(i * 0.01);
    s.angle.push_back(i * 0.01 + nd(rng));
    s.reference.push_back(0.0);
  }
  const RawSession out = smooth_and_differentiate(s);
  double raw = 0.0, smooth = 0.0;
  for (int i = 0; i < 300; ++i) {
    raw += std::pow(s.angle[i] - i * 0.01, 2);
    smooth += std::pow(out.angle[i] - i * 0.01, 2);
  }
  EXPECT_LT(smooth, raw);
  RawSession tiny;
  tiny.time = {0, 0.01, 0.02};
  tiny.angle = tiny.reference = {0, 0, 0};
  EXPECT_THROW(smooth_and_differentiate(tiny), InvalidArgument);
}

RawSession without_velocity(RawSession s) {
  s.velocity.clear();
  return s;
}

TEST(SplitTrainValidation, FourteenAndFourteen) {
  std::vector<RepSpec> reps(14);
  for (int k = 0; k < 14; ++k) reps[k].delay = k % 3;
  PipelineConfig cfg;
  cfg.spline_alpha = 0.0;
  const SubjectEnsembles e = split_train_validation({without_velocity(fixture_session(reps))}, cfg);
  EXPECT_EQ(e.subject_id, "F01");
  EXPECT_EQ(e.train.trials.size(), 14u);
  EXPECT_EQ(e.validation.trials.size(), 14u);
  EXPECT_EQ(e.train.sign, 1);
  EXPECT_EQ(e.validation.sign, -1);
  EXPECT_EQ(e.train.dropped, 0);
}

TEST(SplitTrainValidation, MirroredDataGivesMirroredEnsembles) {
  std::vector<RepSpec> reps(6);
  for (int k = 0; k < 6; ++k) reps[k].delay = k % 4;
  PipelineConfig cfg;
  cfg.spline_alpha = 0.0;
  const SubjectEnsembles e = split_train_validation({without_velocity(fixture_session(reps))}, cfg);
  const TrialEnsemble neg = e.validation.negated();
  ASSERT_EQ(neg.N, e.train.N);
  for (int t = 0; t <= e.train.N; ++t) {
    EXPECT_NEAR((neg.moments.mean[t] - e.train.moments.mean[t]).cwiseAbs().maxCoeff(), 0.0, 1e-9);
    EXPECT_NEAR((neg.moments.cov[t] - e.train.moments.cov[t]).cwiseAbs().maxCoeff(), 0.0, 1e-9);
  }
}

TEST(SplitTrainValidation, MissingSignIsAnError) {
  RawSession s = without_velocity(fixture_session({{0}, {0}}));
  for (double& r : s.reference) r = std::max(r, 0.0);
  PipelineConfig cfg;
  cfg.spline_alpha = 0.0;
  EXPECT_THROW(split_train_validation({s}, cfg), InvalidArgument);
  EXPECT_THROW(split_train_validation({}, cfg), InvalidArgument);
}

TEST(SessionIo, CsvRoundTripAndValidation) {
  const fs::path dir = fs::temp_directory_path() / "lqsid_pipeline_io";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const RawSession s = without_velocity(fixture_session({{0}}));
  write_session_csv(dir / "s.csv", s);
  const RawSession back = read_session_csv(dir / "s.csv", "F01");
  ASSERT_EQ(back.size(), s.size());
  EXPECT_EQ(back.angle, s.angle);
  EXPECT_EQ(back.reference, s.reference);
  EXPECT_NO_THROW(back.validate());

  RawSession gap = back;
  gap.time[10] += 0.005;
  EXPECT_THROW(gap.validate(), InvalidArgument);
  RawSession ragged = back;
  ragged.angle.pop_back();
  EXPECT_THROW(ragged.validate(), InvalidArgument);
  EXPECT_THROW(read_session_csv(dir / "missing.csv", "x"), InvalidArgument);
  fs::remove_all(dir);
}

TEST(EnsembleIo, RoundTrip) {
  std::vector<RepSpec> reps(4);
  PipelineConfig cfg;
  cfg.spline_alpha = 0.0;
  const SubjectEnsembles e = split_train_validation({without_velocity(fixture_session(reps))}, cfg);
  const fs::path dir = fs::temp_directory_path() / "lqsid_ensemble_io";
  fs::remove_all(dir);
  const fs::path meta = write_ensemble(dir, "F01_train", e.train);
  const TrialEnsemble back = read_ensemble(meta);
  EXPECT_EQ(back.N, e.train.N);
  EXPECT_EQ(back.sign, 1);
  EXPECT_EQ(back.trials.size(), e.train.trials.size());
  EXPECT_EQ(back.starts, e.train.starts);
  for (int t = 0; t <= back.N; ++t) {
    EXPECT_NEAR((back.moments.mean[t] - e.train.moments.mean[t]).norm(), 0.0, 1e-15);
    EXPECT_NEAR((back.moments.cov[t] - e.train.moments.cov[t]).norm(), 0.0, 1e-15);
  }
  const nlohmann::json summary = ensemble_summary(back);
  EXPECT_EQ(summary.at("retained"), 4);
  EXPECT_EQ(summary.at("N"), back.N);
  fs::remove_all(dir);
}

TEST(PipelineConfig, JsonAndValidation) {
  PipelineConfig c;
  c.angle_tol = 0.02;
  const PipelineConfig back = nlohmann::json(c).get<PipelineConfig>();
  EXPECT_EQ(back.angle_tol, 0.02);
  EXPECT_FALSE(back.spline_alpha.has_value());
  c.max_start_velocity = 0.05;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace lqsid
