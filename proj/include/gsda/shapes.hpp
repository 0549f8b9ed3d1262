#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "gsda/point_cloud.hpp"

namespace gsda {

inline constexpr int kNumShapeClasses = 8;
inline constexpr std::array<std::string_view, kNumShapeClasses> kShapeClassNames = {
    "sphere", "cube", "cylinder", "cone", "torus", "plane", "helix", "cross"};

/// Class id for a name, or throws Error(kUnknownClass).
int shape_class_id(std::string_view name);
std::string_view shape_class_name(int class_id);

struct ShapeSpec {
  int class_id = 0;
  int n_points = 256;
  std::uint64_t seed = 0;
  double jitter_sigma = 0.0;
};

/// Samples the parametric surface of the named shape, adds isotropic Gaussian
/// jitter and normalizes to the unit ball. Label is the class id.
PointCloud synth_shape(const ShapeSpec& spec);

struct Augmentation {
  bool rotate_z = true;
  double scale_min = 0.8;
  double scale_max = 1.25;
};

struct DatasetConfig {
  std::vector<int> classes{0, 1, 2, 3, 4, 5, 6, 7};
  int per_class = 50;
  int n_points = 256;
  std::uint64_t seed = 0;
  double jitter_sigma = 0.01;
  Augmentation augment;
  double train_fraction = 0.8;
};

struct Dataset {
  std::vector<PointCloud> train;
  std::vector<PointCloud> test;
};

/// Deterministic synthetic dataset. Each class is split independently so both
/// sides keep every class; instance names are "<class>_<index>".
Dataset gen_dataset(const DatasetConfig& config);

}  // namespace gsda
