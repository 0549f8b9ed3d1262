#include "gsda/metrics.hpp"

#include <limits>

#include "gsda/errors.hpp"

namespace gsda {

namespace {

void require_nonempty(const Points& adv, const Points& clean) {
  if (adv.rows() == 0 || clean.rows() == 0) {
    throw Error(ErrorCode::kEmptyCloud, "distance between empty clouds");
  }
}

}  // namespace

double l2_shift(const Points& adv, const Points& clean) {
  if (adv.rows() != clean.rows()) {
    throw Error(ErrorCode::kSizeMismatch, "l2 shift needs equally sized clouds");
  }
  return (adv - clean).norm();
}

NearestNeighbors nearest_neighbors(const Points& adv, const Points& clean) {
  require_nonempty(adv, clean);
  NearestNeighbors nn;
  nn.index.resize(static_cast<std::size_t>(adv.rows()));
  nn.sq_dist.resize(adv.rows());
  for (Eigen::Index i = 0; i < adv.rows(); ++i) {
    const double x = adv(i, 0);
    const double y = adv(i, 1);
    const double z = adv(i, 2);
    double best = std::numeric_limits<double>::infinity();
    int best_j = 0;
    for (Eigen::Index j = 0; j < clean.rows(); ++j) {
      const double dx = x - clean(j, 0);
      const double dy = y - clean(j, 1);
      const double dz = z - clean(j, 2);
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best) {
        best = d;
        best_j = static_cast<int>(j);
      }
    }
    nn.index[static_cast<std::size_t>(i)] = best_j;
    nn.sq_dist[i] = best;
  }
  return nn;
}

DistanceValue chamfer(const Points& adv, const Points& clean, bool with_grad) {
  const auto nn = nearest_neighbors(adv, clean);
  const double n = static_cast<double>(adv.rows());
  DistanceValue out;
  out.value = nn.sq_dist.sum() / n;
  if (with_grad) {
    out.gradient.resize(adv.rows(), 3);
    for (Eigen::Index i = 0; i < adv.rows(); ++i) {
      out.gradient.row(i) = (2.0 / n) * (adv.row(i) - clean.row(nn.index[static_cast<std::size_t>(i)]));
    }
  }
  return out;
}

DistanceValue hausdorff(const Points& adv, const Points& clean, bool with_grad) {
  const auto nn = nearest_neighbors(adv, clean);
  Eigen::Index worst = 0;
  for (Eigen::Index i = 1; i < nn.sq_dist.size(); ++i) {
    if (nn.sq_dist[i] > nn.sq_dist[worst]) worst = i;
  }
  DistanceValue out;
  out.value = nn.sq_dist[worst];
  if (with_grad) {
    out.gradient = Points::Zero(adv.rows(), 3);
    out.gradient.row(worst) = 2.0 * (adv.row(worst) - clean.row(nn.index[static_cast<std::size_t>(worst)]));
  }
  return out;
}

double spectral_energy_delta(const SpectralCoeffs& delta) { return delta.values.norm(); }

DistortionReport distortion(const Points& adv, const Points& clean, const SpectralCoeffs& delta) {
  const auto nn = nearest_neighbors(adv, clean);
  DistortionReport r;
  r.d_norm = l2_shift(adv, clean);
  r.d_c = nn.sq_dist.sum() / static_cast<double>(adv.rows());
  r.d_h = nn.sq_dist.maxCoeff();
  r.e_delta = spectral_energy_delta(delta);
  return r;
}

}  // namespace gsda
