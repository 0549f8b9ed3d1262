#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <tuple>

#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "gsda/defense.hpp"
#include "gsda/shapes.hpp"
#include "support.hpp"

using namespace gsda;

namespace {

using Key = std::tuple<double, double, double>;

std::multiset<Key> keys(const Points& p) {
  std::multiset<Key> s;
  for (Eigen::Index i = 0; i < p.rows(); ++i) s.emplace(p(i, 0), p(i, 1), p(i, 2));
  return s;
}

bool is_subset(const Points& sub, const Points& all) {
  const auto a = keys(all);
  const auto b = keys(sub);
  return std::includes(a.begin(), a.end(), b.begin(), b.end());
}

// Mean distance to the k nearest other points, by sorting every distance.
std::vector<double> brute_scores(const Points& p, int k) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    std::vector<double> d;
    for (Eigen::Index j = 0; j < p.rows(); ++j)
      if (j != i) d.push_back((p.row(i) - p.row(j)).norm());
    std::sort(d.begin(), d.end());
    out.push_back(std::accumulate(d.begin(), d.begin() + k, 0.0) / k);
  }
  return out;
}

}  // namespace

TEST(Sor, RemovesTheFarPoint) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PointCloud c;
  c.points.resize(11, 3);
  for (int i = 0; i < 10; ++i) c.points.row(i) << u(rng), u(rng), u(rng);
  c.points.row(10) << 10, 10, 10;
  const auto out = sor_defense(c, SorConfig{});
  ASSERT_EQ(out.size(), 10);
  EXPECT_EQ(out.points, c.points.topRows(10));
}

TEST(Sor, ZeroRatioIsIdentity) {
  const auto c = synth_shape({0, 64, 1, 0.02});
  SorConfig cfg;
  cfg.drop_ratio = 0.0;
  EXPECT_EQ(sor_defense(c, cfg).points, c.points);
}

TEST(Sor, RatioDropsHighestScores) {
  std::mt19937_64 rng(42);
  PointCloud c{oracle::random_ball_points(100, rng), 3, "r"};
  SorConfig cfg;
  cfg.drop_ratio = 0.1;
  const auto out = sor_defense(c, cfg);
  ASSERT_EQ(out.size(), 90);
  EXPECT_EQ(out.label, 3);
  const auto scores = brute_scores(c.points, cfg.k_neighbors);
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const double cut = sorted[9];
  const auto kept = keys(out.points);
  for (Eigen::Index i = 0; i < 100; ++i) {
    const bool survives = kept.count({c.points(i, 0), c.points(i, 1), c.points(i, 2)}) > 0;
    EXPECT_EQ(survives, scores[static_cast<std::size_t>(i)] < cut) << i;
  }
}

TEST(Sor, ScoresMatchBruteForce) {
  std::mt19937_64 rng(43);
  const Points p = oracle::random_ball_points(50, rng);
  for (int k : {1, 2, 5}) {
    const auto s = sor_scores(p, k);
    const auto ref = brute_scores(p, k);
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_NEAR(s[i], ref[static_cast<std::size_t>(i)], 1e-14);
  }
}

TEST(Sor, RatioTiesKeepLowerIndices) {
  PointCloud c;
  c.points.resize(4, 3);
  c.points << 0, 0, 0, 1, 0, 0, 2, 0, 0, 3, 0, 0;  // ends tie at score 1.5
  SorConfig cfg;
  cfg.drop_ratio = 0.25;
  const auto out = sor_defense(c, cfg);
  ASSERT_EQ(out.size(), 3);
  EXPECT_EQ(out.points.row(0), c.points.row(0));
  EXPECT_EQ(out.points.row(2), c.points.row(2));
}

TEST(Sor, SubsetMonotoneAndEquivariant) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 5; ++trial) {
    PointCloud c{oracle::random_ball_points(80, rng), 0, "x"};
    Eigen::Index last = c.size();
    for (double ratio : {0.0, 0.05, 0.1, 0.2, 0.5}) {
      SorConfig cfg;
      cfg.drop_ratio = ratio;
      const auto out = sor_defense(c, cfg);
      EXPECT_TRUE(is_subset(out.points, c.points));
      EXPECT_LE(out.size(), last);
      last = out.size();
    }
    const auto thr = sor_defense(c, SorConfig{});
    EXPECT_TRUE(is_subset(thr.points, c.points));

    std::vector<int> perm(80);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PointCloud q = c;
    for (int i = 0; i < 80; ++i) q.points.row(i) = c.points.row(perm[static_cast<std::size_t>(i)]);
    EXPECT_EQ(keys(sor_defense(q, SorConfig{}).points), keys(thr.points));
  }
}

TEST(Sor, Errors) {
  PointCloud c{Points::Random(2, 3), 0, ""};
  EXPECT_GSDA_ERROR(sor_defense(c, SorConfig{}), ErrorCode::kTooFewPoints);
  SorConfig bad;
  bad.drop_ratio = 1.0;
  EXPECT_GSDA_ERROR(sor_defense(PointCloud{Points::Random(8, 3), 0, ""}, bad), ErrorCode::kConfig);
  bad = SorConfig{};
  bad.alpha = 0.0;
  EXPECT_GSDA_ERROR(sor_defense(PointCloud{Points::Random(8, 3), 0, ""}, bad), ErrorCode::kConfig);
}

TEST(Srs, CountsSubsetDeterminism) {
  const auto c = synth_shape({1, 1024, 2, 0.01});
  const auto out = srs_defense(c, 500, 7);
  EXPECT_EQ(out.size(), 524);
  EXPECT_TRUE(is_subset(out.points, c.points));
  EXPECT_EQ(srs_defense(c, 500, 7).points, out.points);
  EXPECT_NE(srs_defense(c, 500, 8).points, out.points);
  EXPECT_EQ(keys(srs_defense(c, 0, 1).points), keys(c.points));
}

TEST(Srs, BadCount) {
  const auto c = synth_shape({1, 16, 2, 0.01});
  EXPECT_GSDA_ERROR(srs_defense(c, 16, 0), ErrorCode::kBadCount);
  EXPECT_GSDA_ERROR(srs_defense(c, -1, 0), ErrorCode::kBadCount);
}
