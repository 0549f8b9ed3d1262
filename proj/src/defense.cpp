#include "gsda/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gsda/errors.hpp"
#include "random.hpp"

namespace gsda {

namespace {

PointCloud keep_rows(const PointCloud& cloud, const std::vector<int>& rows) {
  PointCloud out;
  out.label = cloud.label;
  out.name = cloud.name;
  out.points.resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.points.row(static_cast<Eigen::Index>(i)) = cloud.points.row(rows[i]);
  }
  return out;
}

}  // namespace

void SorConfig::validate() const {
  if (k_neighbors < 1) throw Error(ErrorCode::kConfig, "SOR k must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorCode::kConfig, "SOR alpha must be > 0");
  if (drop_ratio && !(*drop_ratio >= 0.0 && *drop_ratio < 1.0)) {
    throw Error(ErrorCode::kConfig, "SOR drop ratio must lie in [0, 1)");
  }
}

Eigen::VectorXd sor_scores(const Points& points, int k) {
  const Eigen::Index n = points.rows();
  if (n <= k) {
    throw Error(ErrorCode::kTooFewPoints,
                "SOR needs more than k=" + std::to_string(k) + " points, got " + std::to_string(n));
  }
  Eigen::VectorXd scores(n);
  std::vector<double> dist(static_cast<std::size_t>(n - 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist[c++] = (points.row(i) - points.row(j)).norm();
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    scores[i] = std::accumulate(dist.begin(), dist.begin() + k, 0.0) / k;
  }
  return scores;
}

PointCloud sor_defense(const PointCloud& cloud, const SorConfig& config) {
  config.validate();
  const Eigen::VectorXd scores = sor_scores(cloud.points, config.k_neighbors);
  const int n = static_cast<int>(scores.size());
  std::vector<int> keep;

  if (config.drop_ratio) {
    const int drop = static_cast<int>(std::ceil(*config.drop_ratio * n - 1e-9));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    // Highest score first; among equal scores the higher index goes first so
    // lower indices survive.
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return a > b;
    });
    std::vector<bool> dropped(static_cast<std::size_t>(n), false);
    for (int i = 0; i < drop; ++i) dropped[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
    for (int i = 0; i < n; ++i) {
      if (!dropped[static_cast<std::size_t>(i)]) keep.push_back(i);
    }
  } else {
    const double mean = scores.mean();
    const double var = n > 1 ? (scores.array() - mean).square().sum() / (n - 1) : 0.0;
    const double threshold = mean + config.alpha * std::sqrt(var);
    for (int i = 0; i < n; ++i) {
      if (scores[i] <= threshold) keep.push_back(i);
    }
  }
  return keep_rows(cloud, keep);
}

PointCloud srs_defense(const PointCloud& cloud, int drop_count, std::uint64_t seed) {
  const int n = static_cast<int>(cloud.size());
  if (drop_count < 0 || drop_count >= n) {
    throw Error(ErrorCode::kBadCount, "cannot drop " + std::to_string(drop_count) + " of " +
                                          std::to_string(n) + " points");
  }
  auto rng = detail::make_rng({seed, 0x535253ULL});
  return keep_rows(cloud, detail::random_subset(n, n - drop_count, rng));
}

}  // namespace gsda
