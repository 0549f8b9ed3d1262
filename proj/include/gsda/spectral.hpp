#pragma once

#include <ostream>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gsda/point_cloud.hpp"

namespace gsda {

/// Unweighted, undirected K-nearest-neighbor graph. The directed relation is
/// symmetrized by union, so every vertex keeps at least K neighbors.
struct KnnGraph {
  int n = 0;
  int k = 0;
  std::vector<std::vector<int>> neighbors;  // sorted, no self loops

  int degree(int v) const { return static_cast<int>(neighbors[static_cast<std::size_t>(v)].size()); }
  bool has_edge(int a, int b) const;
  Eigen::MatrixXd adjacency() const;
};

/// Euclidean K-NN; distance ties resolve to the smaller point index.
/// Throws Error(kKTooLarge) unless 1 <= k < n.
KnnGraph build_knn_graph(const Points& points, int k);

/// Combinatorial Laplacian D - A.
Eigen::MatrixXd laplacian(const KnnGraph& graph);

/// Orthonormal eigenvectors of the Laplacian in ascending eigenvalue order.
struct SpectralBasis {
  Eigen::MatrixXd U;
  Eigen::VectorXd lambdas;

  Eigen::Index size() const { return lambdas.size(); }
};

/// Dense symmetric eigendecomposition. Each eigenvector is signed so that its
/// largest-magnitude entry is positive.
SpectralBasis eigendecompose(const Eigen::MatrixXd& L);

/// Graph + Laplacian + eigendecomposition in one step.
SpectralBasis graph_basis(const Points& points, int k);

/// Orthonormal DCT-II matrix (rows are frequencies), as an n x n basis whose
/// columns play the role of U for the 1D-DCT ablation.
SpectralBasis dct_basis(Eigen::Index n);

struct SpectralCoeffs {
  Eigen::MatrixX3d values;  // row i: frequency i, columns x/y/z
};

SpectralCoeffs gft(const SpectralBasis& basis, const Points& signal);
Points igft(const SpectralBasis& basis, const SpectralCoeffs& coeffs);

/// Half-open index range [begin, end) of frequencies.
struct IndexRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index size() const { return end - begin; }
  bool contains(Eigen::Index i) const { return i >= begin && i < end; }
};

/// Index form of the three-band partition: low = [0, low_end),
/// mid = [low_end, mid_end), high = [mid_end, n).
struct BandBounds {
  Eigen::Index low_end = 0;
  Eigen::Index mid_end = 0;

  IndexRange low() const { return {0, low_end}; }
  IndexRange mid() const { return {low_end, mid_end}; }
  IndexRange high(Eigen::Index n) const { return {mid_end, n}; }
};

/// Default partition scaled from 1024 points: low = n/32 and mid ends at n/4.
BandBounds default_band_bounds(Eigen::Index n);

/// Converts eigenvalue thresholds (lambda_l, lambda_h) to index bounds:
/// index i is low if lambda_i < lambda_l, mid if lambda_i < lambda_h.
BandBounds bounds_from_lambdas(const Eigen::VectorXd& lambdas, double lambda_l, double lambda_h);

/// Smallest m such that the lowest m frequencies hold at least `fraction`
/// of the total energy.
Eigen::Index energy_quantile_index(const SpectralCoeffs& coeffs, double fraction);

struct BandEnergy {
  double low = 0.0;
  double mid = 0.0;
  double high = 0.0;
};

/// Energy fractions per band, summed jointly over the three coordinate
/// columns. All-zero coefficients give all-zero fractions.
BandEnergy band_energy(const SpectralCoeffs& coeffs, const BandBounds& bounds);

/// Fraction of energy in the first m frequencies.
double low_frequency_energy_fraction(const SpectralCoeffs& coeffs, Eigen::Index m);

struct ZeroBand {};
struct AddConstant {
  double delta = 0.0;
};
using BandOp = std::variant<ZeroBand, AddConstant>;

/// Throws Error(kBadRange) when the range falls outside [0, n).
SpectralCoeffs band_filter(const SpectralCoeffs& coeffs, IndexRange band, const BandOp& op);

/// Orthonormal DCT-II along the point index, per coordinate column.
Points dct1d(const Points& signal);
Points idct1d(const Points& coeffs);

/// CSV: index,lambda,abs_x,abs_y,abs_z,energy,cumulative_energy
void write_spectrum_csv(std::ostream& out, const SpectralBasis& basis, const SpectralCoeffs& coeffs);

}  // namespace gsda
