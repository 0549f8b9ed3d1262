#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace gsda {

using Points = Eigen::MatrixX3d;

struct PointCloud {
  Points points;
  std::optional<int> label;
  std::string name;

  Eigen::Index size() const { return points.rows(); }
};

enum class CloudFormat { kXyz, kOff, kPly };

/// Guesses the format from the file extension (.xyz, .off, .ply).
CloudFormat format_from_path(const std::filesystem::path& path);

/// Reads an ASCII point cloud. OFF faces and extra PLY properties are ignored.
/// Throws Error(kParse) on malformed input or non-finite coordinates and
/// Error(kEmptyCloud) when no vertices are present.
PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_point_cloud(const std::filesystem::path& path);

/// Writes coordinates using the shortest decimal form that parses back to the
/// identical double, so save/load is bit-exact.
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path,
                      CloudFormat format);
void save_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);

/// Centers on the centroid and scales so the farthest point has norm 1.
/// Coincident points collapse to the origin.
PointCloud normalize_unit_ball(const PointCloud& cloud);

/// Uniform subsample of n points without replacement, in original index order.
PointCloud sample_points(const PointCloud& cloud, Eigen::Index n, std::uint64_t seed);

bool all_finite(const Points& points);

}  // namespace gsda
