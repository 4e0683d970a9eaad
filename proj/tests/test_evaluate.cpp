#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "rpsf/error.hpp"
#include "rpsf/evaluate.hpp"

using namespace rpsf;

namespace {

const OpticsConfig kCfg;

Scene scene_of(std::initializer_list<std::array<double, 4>> rows) {
  // x, y, slice, flux
  Scene s;
  for (const auto& r : rows) s.sources.push_back({r[0], r[1], kCfg.zeta_at(r[2]), r[3]});
  return s;
}

}  // namespace

TEST(Match, ExactAndToleranceBoundaries) {
  const Scene s = scene_of({{10, 10, 5, 1000}, {50, 50, 10, 2000}});
  const std::vector<Detection> d = {{10, 12, 6, 1100}, {50, 52.01, 10, 2000}};
  const MatchReport r = match(s, d, {}, kCfg);
  ASSERT_EQ(r.true_positives.size(), 1u);
  EXPECT_EQ(r.true_positives[0].truth, 0);
  EXPECT_NEAR(r.true_positives[0].distance, std::sqrt(2.0), 1e-9);
  EXPECT_EQ(r.false_positives, std::vector<int>{1});
  EXPECT_EQ(r.false_negatives, std::vector<int>{1});
  EXPECT_DOUBLE_EQ(r.recall, 0.5);
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  ASSERT_EQ(r.flux_rel_errors.size(), 1u);
  EXPECT_NEAR(r.flux_rel_errors[0], 0.1, 1e-12);
}

TEST(Match, AxialToleranceInSlices) {
  const Scene s = scene_of({{20, 20, 5, 1000}});
  EXPECT_EQ(match(s, {{20, 20, 6.5, 1}}, {}, kCfg).true_positives.size(), 0u);
  MatchCriteria wide;
  wide.axial_tol = 2.0;
  EXPECT_EQ(match(s, {{20, 20, 6.5, 1}}, wide, kCfg).true_positives.size(), 1u);
}

TEST(Match, EmptyConventions) {
  const MatchReport both = match(Scene{}, {}, {}, kCfg);
  EXPECT_EQ(both.recall, 1.0);
  EXPECT_EQ(both.precision, 1.0);
  const MatchReport no_dets = match(scene_of({{5, 5, 5, 10}}), {}, {}, kCfg);
  EXPECT_EQ(no_dets.recall, 0.0);
  EXPECT_EQ(no_dets.precision, 0.0);
  const MatchReport no_truth = match(Scene{}, {{5, 5, 5, 10}}, {}, kCfg);
  EXPECT_EQ(no_truth.recall, 0.0);
  EXPECT_EQ(no_truth.precision, 0.0);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(f1_score(1.0, 0.5), 2.0 / 3.0);
}

TEST(Match, OneToOne) {
  // Two detections near one truth: only one may match.
  const Scene s = scene_of({{30, 30, 10, 500}});
  const MatchReport r = match(s, {{30.5, 30, 10, 1}, {30, 30.2, 10, 2}}, {}, kCfg);
  ASSERT_EQ(r.true_positives.size(), 1u);
  EXPECT_EQ(r.true_positives[0].detection, 1);
  EXPECT_EQ(r.false_positives, std::vector<int>{0});
  EXPECT_DOUBLE_EQ(r.precision, 0.5);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
}

TEST(Match, InvalidCriteria) {
  MatchCriteria c;
  c.lateral_tol = 0.0;
  EXPECT_THROW(match(Scene{}, {}, c, kCfg), ConfigError);
}

TEST(Match, PermutationInvariantCounts) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> ux(0, 96), uz(0, 20), jitter(-2.5, 2.5);
  for (int trial = 0; trial < 50; ++trial) {
    Scene s;
    std::vector<Detection> d;
    for (int i = 0; i < 10; ++i) {
      const double x = ux(rng), y = ux(rng), z = uz(rng);
      s.sources.push_back({x, y, kCfg.zeta_at(z), 1000});
      d.push_back({x + jitter(rng), y + jitter(rng), z + jitter(rng) / 2, 900});
    }
    const MatchReport base = match(s, d, {}, kCfg);
    std::vector<Detection> shuffled = d;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const MatchReport perm = match(s, shuffled, {}, kCfg);
    EXPECT_EQ(base.true_positives.size(), perm.true_positives.size());
    double a = 0, b = 0;
    for (const auto& p : base.true_positives) a += p.distance;
    for (const auto& p : perm.true_positives) b += p.distance;
    EXPECT_NEAR(a, b, 1e-12);

    std::vector<int> used;
    for (const auto& p : base.true_positives) used.push_back(p.detection);
    std::sort(used.begin(), used.end());
    EXPECT_EQ(std::adjacent_find(used.begin(), used.end()), used.end());
    EXPECT_EQ(base.true_positives.size() + base.false_negatives.size(), 10u);
    EXPECT_EQ(base.true_positives.size() + base.false_positives.size(), 10u);
  }
}

TEST(Match, GreedyAgreesWithOptimalOnSparseScenes) {
  // With sources farther apart than twice the tolerance every truth has at
  // most one candidate cluster, so greedy matching is optimal.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> jitter(-1.8, 1.8), uz(0.0, 20.0);
  for (int trial = 0; trial < 30; ++trial) {
    Scene s;
    std::vector<Detection> d;
    for (int i = 0; i < 8; ++i) {
      const double x = 6 + 12 * (i % 4), y = 10 + 30 * (i / 4), z = uz(rng);
      s.sources.push_back({x, y, kCfg.zeta_at(z), 1000});
      if (i % 3 != 0) d.push_back({x + jitter(rng), y + jitter(rng) / 2, z + jitter(rng) / 2, 1000});
    }
    d.push_back({90, 90, 3, 50});
    const MatchReport g = match(s, d, {}, kCfg);
    const MatchReport o = match_optimal(s, d, {}, kCfg);
    EXPECT_EQ(g.true_positives.size(), o.true_positives.size());
    EXPECT_EQ(g.recall, o.recall);
    EXPECT_EQ(g.precision, o.precision);
  }
}

TEST(Match, OptimalCanBeatGreedy) {
  // Greedy takes the closest pair (t0, d0) and strands t1.
  const Scene s = scene_of({{10, 10, 5, 1}, {10, 12, 5, 1}});
  const std::vector<Detection> d = {{10, 10.9, 5, 1}, {10, 8.5, 5, 1}};
  EXPECT_EQ(match(s, d, {}, kCfg).true_positives.size(), 1u);
  EXPECT_EQ(match_optimal(s, d, {}, kCfg).true_positives.size(), 2u);
  Scene big;
  big.sources.assign(13, PointSource{});
  EXPECT_THROW(match_optimal(big, {}, {}, kCfg), ConfigError);
}

TEST(Aggregate, MeansAndHistogram) {
  MatchReport a, b;
  a.recall = 1.0, a.precision = 0.8;
  a.true_positives.resize(2);
  a.flux_rel_errors = {0.01, -0.03};
  b.recall = 0.8, b.precision = 1.0;
  b.true_positives.resize(3);
  b.flux_rel_errors = {0.5, 3.0, -2.0};
  const Summary s = aggregate({a, b});
  EXPECT_EQ(s.num_reports, 2);
  EXPECT_DOUBLE_EQ(s.mean_recall, 0.9);
  EXPECT_DOUBLE_EQ(s.mean_precision, 0.9);
  EXPECT_DOUBLE_EQ(s.mean_f1, f1_score(1.0, 0.8));
  EXPECT_EQ(s.true_positives, 5);
  ASSERT_EQ(s.histogram.size(), 40u);
  EXPECT_EQ(std::accumulate(s.histogram.begin(), s.histogram.end(), 0), 5);
  EXPECT_EQ(s.histogram[20], 1);  // 0.01 in [0, 0.05)
  EXPECT_EQ(s.histogram[19], 1);  // -0.03
  EXPECT_EQ(s.histogram[30], 1);  // 0.5
  EXPECT_EQ(s.histogram[39], 1);  // clamped
  EXPECT_EQ(s.histogram[0], 1);   // clamped
  EXPECT_THROW(aggregate({}), ConfigError);
}
