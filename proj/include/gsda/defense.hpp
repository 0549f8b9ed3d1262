#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "gsda/point_cloud.hpp"

namespace gsda {

struct SorConfig {
  int k_neighbors = 2;
  double alpha = 1.1;
  std::optional<double> drop_ratio;  // overrides the mean + alpha * std rule

  void validate() const;
};

/// Mean Euclidean distance from each point to its k nearest neighbors.
Eigen::VectorXd sor_scores(const Points& points, int k);

/// Statistical outlier removal. Survivors keep their input order.
/// Throws Error(kTooFewPoints) unless n > k.
PointCloud sor_defense(const PointCloud& cloud, const SorConfig& config);

/// Drops drop_count uniformly chosen points. Throws Error(kBadCount) unless
/// 0 <= drop_count < n.
PointCloud srs_defense(const PointCloud& cloud, int drop_count, std::uint64_t seed);

}  // namespace gsda
