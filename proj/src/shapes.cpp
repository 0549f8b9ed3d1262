#include "gsda/shapes.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "gsda/errors.hpp"
#include "random.hpp"

namespace gsda {

namespace {

using Rng = std::mt19937_64;
constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::RowVector3d random_unit(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::RowVector3d v;
  do {
    v = {gauss(rng), gauss(rng), gauss(rng)};
  } while (v.norm() < 1e-12);
  return v.normalized();
}

// Antipodal pairs (plus one balanced triple when n is odd) keep the centroid at
// the origin, so normalization leaves every point on the unit sphere.
Points sample_sphere(int n, Rng& rng) {
  Points p(n, 3);
  int i = 0;
  if (n % 2 == 1) {
    const Eigen::RowVector3d a = random_unit(rng);
    Eigen::RowVector3d b = random_unit(rng);
    b = (b - b.dot(a) * a).normalized();
    const double s = std::sqrt(3.0) / 2.0;
    p.row(0) = a;
    p.row(1) = -0.5 * a + s * b;
    p.row(2) = -0.5 * a - s * b;
    i = 3;
  }
  for (; i < n; i += 2) {
    const Eigen::RowVector3d v = random_unit(rng);
    p.row(i) = v;
    p.row(i + 1) = -v;
  }
  return p;
}

Points sample_cube(int n, Rng& rng) {
  Points p(n, 3);
  std::uniform_int_distribution<int> face(0, 5);
  for (int i = 0; i < n; ++i) {
    const int f = face(rng);
    const int axis = f / 2;
    const double side = (f % 2 == 0) ? -1.0 : 1.0;
    Eigen::RowVector3d q{uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)};
    q[axis] = side;
    p.row(i) = q;
  }
  return p;
}

Points sample_cylinder(int n, Rng& rng) {
  constexpr double r = 0.5;
  constexpr double h = 2.0;
  const double lateral = 2.0 * kPi * r * h;
  const double cap = kPi * r * r;
  Points p(n, 3);
  for (int i = 0; i < n; ++i) {
    const double pick = uniform(rng, 0.0, lateral + 2.0 * cap);
    const double theta = uniform(rng, 0.0, 2.0 * kPi);
    if (pick < lateral) {
      p.row(i) << r * std::cos(theta), r * std::sin(theta), uniform(rng, -h / 2, h / 2);
    } else {
      const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
      const double z = pick < lateral + cap ? -h / 2 : h / 2;
      p.row(i) << rho * std::cos(theta), rho * std::sin(theta), z;
    }
  }
  return p;
}

Points sample_cone(int n, Rng& rng) {
  constexpr double r = 1.0;
  constexpr double h = 2.0;
  const double lateral = kPi * r * std::sqrt(r * r + h * h);
  const double base = kPi * r * r;
  Points p(n, 3);
  for (int i = 0; i < n; ++i) {
    const double theta = uniform(rng, 0.0, 2.0 * kPi);
    if (uniform(rng, 0.0, lateral + base) < lateral) {
      // Area grows linearly with distance from the apex.
      const double t = std::sqrt(uniform(rng, 0.0, 1.0));
      p.row(i) << t * r * std::cos(theta), t * r * std::sin(theta), h / 2 - t * h;
    } else {
      const double rho = r * std::sqrt(uniform(rng, 0.0, 1.0));
      p.row(i) << rho * std::cos(theta), rho * std::sin(theta), -h / 2;
    }
  }
  return p;
}

Points sample_torus(int n, Rng& rng) {
  constexpr double major = 1.0;
  constexpr double minor = 0.35;
  Points p(n, 3);
  for (int i = 0; i < n; ++i) {
    double u = 0.0;
    double v = 0.0;
    // Rejection on the area element (R + r cos v).
    do {
      u = uniform(rng, 0.0, 2.0 * kPi);
      v = uniform(rng, 0.0, 2.0 * kPi);
    } while (uniform(rng, 0.0, major + minor) > major + minor * std::cos(v));
    const double ring = major + minor * std::cos(v);
    p.row(i) << ring * std::cos(u), ring * std::sin(u), minor * std::sin(v);
  }
  return p;
}

Points sample_plane(int n, Rng& rng) {
  Points p(n, 3);
  for (int i = 0; i < n; ++i) p.row(i) << uniform(rng, -1, 1), uniform(rng, -1, 1), 0.0;
  return p;
}

Points sample_helix(int n, Rng& rng) {
  constexpr double coil = 0.8;
  constexpr double tube = 0.12;
  constexpr double turns = 3.0;
  constexpr double height = 2.0;
  const double pitch = height / (2.0 * kPi * turns);
  Points p(n, 3);
  for (int i = 0; i < n; ++i) {
    const double t = uniform(rng, 0.0, 2.0 * kPi * turns);
    const double a = uniform(rng, 0.0, 2.0 * kPi);
    const Eigen::Vector3d c(coil * std::cos(t), coil * std::sin(t), pitch * t - height / 2);
    const Eigen::Vector3d tangent =
        Eigen::Vector3d(-coil * std::sin(t), coil * std::cos(t), pitch).normalized();
    const Eigen::Vector3d normal(std::cos(t), std::sin(t), 0.0);
    const Eigen::Vector3d binormal = tangent.cross(normal);
    const Eigen::Vector3d q = c + tube * (std::cos(a) * normal + std::sin(a) * binormal);
    p.row(i) = q.transpose();
  }
  return p;
}

// Three orthogonal square bars through the origin; each bar's surface is
// sampled uniformly (overlapping interiors are not trimmed).
Points sample_cross(int n, Rng& rng) {
  constexpr double half_len = 1.0;
  constexpr double half_w = 0.15;
  Points p(n, 3);
  std::uniform_int_distribution<int> bar(0, 2);
  const double side_area = 2 * half_len * 2 * half_w;
  const double end_area = 2 * half_w * 2 * half_w;
  for (int i = 0; i < n; ++i) {
    const int axis = bar(rng);
    Eigen::RowVector3d local;  // local x runs along the bar
    const double pick = uniform(rng, 0.0, 4 * side_area + 2 * end_area);
    if (pick < 4 * side_area) {
      const int s = static_cast<int>(pick / side_area);
      const double along = uniform(rng, -half_len, half_len);
      const double across = uniform(rng, -half_w, half_w);
      const double sign = (s % 2 == 0) ? -half_w : half_w;
      local = s < 2 ? Eigen::RowVector3d(along, sign, across)
                    : Eigen::RowVector3d(along, across, sign);
    } else {
      const double sign = pick < 4 * side_area + end_area ? -half_len : half_len;
      local = {sign, uniform(rng, -half_w, half_w), uniform(rng, -half_w, half_w)};
    }
    Eigen::RowVector3d q;
    q[axis] = local[0];
    q[(axis + 1) % 3] = local[1];
    q[(axis + 2) % 3] = local[2];
    p.row(i) = q;
  }
  return p;
}

Points sample_raw(int class_id, int n, Rng& rng) {
  switch (class_id) {
    case 0: return sample_sphere(n, rng);
    case 1: return sample_cube(n, rng);
    case 2: return sample_cylinder(n, rng);
    case 3: return sample_cone(n, rng);
    case 4: return sample_torus(n, rng);
    case 5: return sample_plane(n, rng);
    case 6: return sample_helix(n, rng);
    case 7: return sample_cross(n, rng);
    default: break;
  }
  throw Error(ErrorCode::kUnknownClass, "class id " + std::to_string(class_id));
}

void add_jitter(Points& p, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (int k = 0; k < 3; ++k) p(i, k) += gauss(rng);
  }
}

void check_spec(int class_id, int n_points, double jitter) {
  if (class_id < 0 || class_id >= kNumShapeClasses) {
    throw Error(ErrorCode::kUnknownClass, "class id " + std::to_string(class_id));
  }
  if (n_points < 8) throw Error(ErrorCode::kConfig, "n_points must be >= 8");
  if (!(jitter >= 0.0)) throw Error(ErrorCode::kConfig, "jitter_sigma must be >= 0");
}

}  // namespace

int shape_class_id(std::string_view name) {
  for (int i = 0; i < kNumShapeClasses; ++i) {
    if (kShapeClassNames[static_cast<std::size_t>(i)] == name) return i;
  }
  throw Error(ErrorCode::kUnknownClass, std::string(name));
}

std::string_view shape_class_name(int class_id) {
  if (class_id < 0 || class_id >= kNumShapeClasses) {
    throw Error(ErrorCode::kUnknownClass, "class id " + std::to_string(class_id));
  }
  return kShapeClassNames[static_cast<std::size_t>(class_id)];
}

PointCloud synth_shape(const ShapeSpec& spec) {
  check_spec(spec.class_id, spec.n_points, spec.jitter_sigma);
  auto rng = detail::make_rng({spec.seed, static_cast<std::uint64_t>(spec.class_id),
                               static_cast<std::uint64_t>(spec.n_points)});
  PointCloud cloud;
  cloud.points = sample_raw(spec.class_id, spec.n_points, rng);
  add_jitter(cloud.points, spec.jitter_sigma, rng);
  cloud = normalize_unit_ball(cloud);
  cloud.label = spec.class_id;
  cloud.name = std::string(shape_class_name(spec.class_id));
  return cloud;
}

Dataset gen_dataset(const DatasetConfig& config) {
  if (config.per_class < 2) {
    throw Error(ErrorCode::kConfig, "per_class must be >= 2 to form a train/test split");
  }
  if (!(config.train_fraction > 0.0 && config.train_fraction < 1.0)) {
    throw Error(ErrorCode::kConfig, "train_fraction must lie in (0, 1)");
  }
  if (config.augment.scale_min <= 0.0 || config.augment.scale_max < config.augment.scale_min) {
    throw Error(ErrorCode::kConfig, "bad scale range");
  }
  int n_train = static_cast<int>(std::lround(config.per_class * config.train_fraction));
  n_train = std::clamp(n_train, 1, config.per_class - 1);

  Dataset out;
  for (int class_id : config.classes) {
    check_spec(class_id, config.n_points, config.jitter_sigma);
    auto split_rng = detail::make_rng({config.seed, static_cast<std::uint64_t>(class_id), 0x5917ULL});
    const auto train_idx = detail::random_subset(config.per_class, n_train, split_rng);
    std::vector<bool> is_train(static_cast<std::size_t>(config.per_class), false);
    for (int i : train_idx) is_train[static_cast<std::size_t>(i)] = true;

    for (int i = 0; i < config.per_class; ++i) {
      auto rng = detail::make_rng({config.seed, static_cast<std::uint64_t>(class_id),
                                   static_cast<std::uint64_t>(i), 0xda7aULL});
      PointCloud cloud;
      cloud.points = sample_raw(class_id, config.n_points, rng);
      add_jitter(cloud.points, config.jitter_sigma, rng);
      if (config.augment.rotate_z) {
        const double angle = uniform(rng, 0.0, 2.0 * kPi);
        Eigen::Matrix3d rot;
        rot << std::cos(angle), -std::sin(angle), 0, std::sin(angle), std::cos(angle), 0, 0, 0, 1;
        cloud.points = (cloud.points * rot.transpose()).eval();
      }
      cloud.points *= uniform(rng, config.augment.scale_min, config.augment.scale_max);
      cloud = normalize_unit_ball(cloud);
      cloud.label = class_id;
      cloud.name = std::string(shape_class_name(class_id)) + "_" + std::to_string(i);
      (is_train[static_cast<std::size_t>(i)] ? out.train : out.test).push_back(std::move(cloud));
    }
  }
  return out;
}

}  // namespace gsda
