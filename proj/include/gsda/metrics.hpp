#pragma once

#include <Eigen/Core>

#include "gsda/point_cloud.hpp"
#include "gsda/spectral.hpp"

namespace gsda {

struct DistortionReport {
  double d_norm = 0.0;    // l2 shift over corresponding points
  double d_c = 0.0;       // one-sided Chamfer (mean squared NN distance)
  double d_h = 0.0;       // one-sided Hausdorff (max squared NN distance)
  double e_delta = 0.0;   // Frobenius norm of the spectral perturbation
};

/// Value plus optional gradient with respect to the adversarial points.
struct DistanceValue {
  double value = 0.0;
  Points gradient;  // empty unless requested
};

/// sqrt(sum_i |adv_i - clean_i|^2). Throws Error(kSizeMismatch).
double l2_shift(const Points& adv, const Points& clean);

/// Index of the nearest clean point for every adversarial point, lowest index
/// on ties, together with the squared distance.
struct NearestNeighbors {
  std::vector<int> index;
  Eigen::VectorXd sq_dist;
};
NearestNeighbors nearest_neighbors(const Points& adv, const Points& clean);

/// (1/n') sum_i min_j |adv_i - clean_j|^2, nearest assignments held fixed for
/// the gradient. Throws Error(kEmptyCloud).
DistanceValue chamfer(const Points& adv, const Points& clean, bool with_grad);

/// max_i min_j |adv_i - clean_j|^2; the subgradient lives on the lowest-index
/// arg-max point only.
DistanceValue hausdorff(const Points& adv, const Points& clean, bool with_grad);

double spectral_energy_delta(const SpectralCoeffs& delta);

/// All four metrics; e_delta uses the supplied perturbation.
DistortionReport distortion(const Points& adv, const Points& clean, const SpectralCoeffs& delta);

}  // namespace gsda
