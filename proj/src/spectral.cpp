#include "gsda/spectral.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Eigenvalues>

#include "gsda/errors.hpp"

namespace gsda {

namespace {

void check_rows(const char* what, Eigen::Index expected, Eigen::Index got) {
  if (expected != got) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": expected " +
                                                   std::to_string(expected) + " rows, got " +
                                                   std::to_string(got));
  }
}

std::string fmt(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, end);
}

}  // namespace

bool KnnGraph::has_edge(int a, int b) const {
  const auto& row = neighbors[static_cast<std::size_t>(a)];
  return std::binary_search(row.begin(), row.end(), b);
}

Eigen::MatrixXd KnnGraph::adjacency() const {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j : neighbors[static_cast<std::size_t>(i)]) A(i, j) = 1.0;
  }
  return A;
}

KnnGraph build_knn_graph(const Points& points, int k) {
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k >= n) {
    throw Error(ErrorCode::kKTooLarge,
                "K=" + std::to_string(k) + " requires 1 <= K < n=" + std::to_string(n));
  }
  KnnGraph g;
  g.n = n;
  g.k = k;
  g.neighbors.assign(static_cast<std::size_t>(n), {});

  std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
  for (int i = 0; i < n; ++i) {
    std::size_t c = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      cand[c++] = {(points.row(i) - points.row(j)).squaredNorm(), j};
    }
    // pair ordering gives the smaller-index tie break for free
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int m = 0; m < k; ++m) {
      const int j = cand[static_cast<std::size_t>(m)].second;
      g.neighbors[static_cast<std::size_t>(i)].push_back(j);
      g.neighbors[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  for (auto& row : g.neighbors) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  return g;
}

Eigen::MatrixXd laplacian(const KnnGraph& graph) {
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(graph.n, graph.n);
  for (int i = 0; i < graph.n; ++i) {
    for (int j : graph.neighbors[static_cast<std::size_t>(i)]) L(i, j) = -1.0;
    L(i, i) = graph.degree(i);
  }
  return L;
}

SpectralBasis eigendecompose(const Eigen::MatrixXd& L) {
  if (L.rows() != L.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "Laplacian must be square");
  }
  if ((L - L.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorCode::kConfig, "matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(L);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kConvergence, "symmetric eigensolver did not converge");
  }
  SpectralBasis basis;
  basis.lambdas = solver.eigenvalues();
  basis.U = solver.eigenvectors();
  for (Eigen::Index c = 0; c < basis.U.cols(); ++c) {
    Eigen::Index arg = 0;
    basis.U.col(c).cwiseAbs().maxCoeff(&arg);
    if (basis.U(arg, c) < 0.0) basis.U.col(c) *= -1.0;
  }
  return basis;
}

SpectralBasis graph_basis(const Points& points, int k) {
  return eigendecompose(laplacian(build_knn_graph(points, k)));
}

SpectralBasis dct_basis(Eigen::Index n) {
  if (n < 1) throw Error(ErrorCode::kConfig, "DCT size must be >= 1");
  SpectralBasis basis;
  basis.U.resize(n, n);
  basis.lambdas.resize(n);
  const double nd = static_cast<double>(n);
  for (Eigen::Index f = 0; f < n; ++f) {
    const double scale = f == 0 ? std::sqrt(1.0 / nd) : std::sqrt(2.0 / nd);
    for (Eigen::Index i = 0; i < n; ++i) {
      basis.U(i, f) = scale * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                                       static_cast<double>(f) / nd);
    }
    // DCT-II vectors diagonalize the path-graph Laplacian with these eigenvalues.
    basis.lambdas[f] = 2.0 - 2.0 * std::cos(std::numbers::pi * static_cast<double>(f) / nd);
  }
  basis.lambdas[0] = 0.0;
  return basis;
}

SpectralCoeffs gft(const SpectralBasis& basis, const Points& signal) {
  check_rows("gft", basis.U.rows(), signal.rows());
  return {basis.U.transpose() * signal};
}

Points igft(const SpectralBasis& basis, const SpectralCoeffs& coeffs) {
  check_rows("igft", basis.U.cols(), coeffs.values.rows());
  return basis.U * coeffs.values;
}

BandBounds default_band_bounds(Eigen::Index n) {
  return {std::max<Eigen::Index>(1, n / 32), std::max<Eigen::Index>(1, n / 4)};
}

BandBounds bounds_from_lambdas(const Eigen::VectorXd& lambdas, double lambda_l, double lambda_h) {
  if (!(lambda_l <= lambda_h)) throw Error(ErrorCode::kBadRange, "lambda_l must be <= lambda_h");
  BandBounds b;
  const auto* first = lambdas.data();
  const auto* last = lambdas.data() + lambdas.size();
  b.low_end = std::lower_bound(first, last, lambda_l) - first;
  b.mid_end = std::lower_bound(first, last, lambda_h) - first;
  return b;
}

Eigen::Index energy_quantile_index(const SpectralCoeffs& coeffs, double fraction) {
  const Eigen::VectorXd row_energy = coeffs.values.rowwise().squaredNorm();
  const double total = row_energy.sum();
  if (total <= 0.0) return 0;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < row_energy.size(); ++i) {
    acc += row_energy[i];
    if (acc >= fraction * total) return i + 1;
  }
  return row_energy.size();
}

BandEnergy band_energy(const SpectralCoeffs& coeffs, const BandBounds& bounds) {
  const Eigen::Index n = coeffs.values.rows();
  if (bounds.low_end < 0 || bounds.low_end > bounds.mid_end || bounds.mid_end > n) {
    throw Error(ErrorCode::kBadRange, "band bounds outside [0, n]");
  }
  const Eigen::VectorXd row_energy = coeffs.values.rowwise().squaredNorm();
  const double low = row_energy.head(bounds.low_end).sum();
  const double mid = row_energy.segment(bounds.low_end, bounds.mid_end - bounds.low_end).sum();
  const double high = row_energy.tail(n - bounds.mid_end).sum();
  const double total = low + mid + high;
  if (total <= 0.0) return {};
  return {low / total, mid / total, high / total};
}

double low_frequency_energy_fraction(const SpectralCoeffs& coeffs, Eigen::Index m) {
  const Eigen::Index n = coeffs.values.rows();
  return band_energy(coeffs, {std::min(m, n), n}).low;
}

SpectralCoeffs band_filter(const SpectralCoeffs& coeffs, IndexRange band, const BandOp& op) {
  const Eigen::Index n = coeffs.values.rows();
  if (band.begin < 0 || band.end > n || band.begin > band.end) {
    throw Error(ErrorCode::kBadRange, "band [" + std::to_string(band.begin) + ", " +
                                          std::to_string(band.end) + ") outside [0, " +
                                          std::to_string(n) + ")");
  }
  SpectralCoeffs out = coeffs;
  auto rows = out.values.middleRows(band.begin, band.size());
  if (std::holds_alternative<ZeroBand>(op)) {
    rows.setZero();
  } else {
    rows.array() += std::get<AddConstant>(op).delta;
  }
  return out;
}

Points dct1d(const Points& signal) {
  return dct_basis(signal.rows()).U.transpose() * signal;
}

Points idct1d(const Points& coeffs) {
  return dct_basis(coeffs.rows()).U * coeffs;
}

void write_spectrum_csv(std::ostream& out, const SpectralBasis& basis, const SpectralCoeffs& coeffs) {
  check_rows("spectrum", basis.lambdas.size(), coeffs.values.rows());
  const Eigen::VectorXd row_energy = coeffs.values.rowwise().squaredNorm();
  const double total = row_energy.sum();
  out << "index,lambda,abs_x,abs_y,abs_z,energy,cumulative_energy\n";
  double acc = 0.0;
  for (Eigen::Index i = 0; i < coeffs.values.rows(); ++i) {
    acc += row_energy[i];
    out << i << ',' << fmt(basis.lambdas[i]) << ',' << fmt(std::abs(coeffs.values(i, 0))) << ','
        << fmt(std::abs(coeffs.values(i, 1))) << ',' << fmt(std::abs(coeffs.values(i, 2))) << ','
        << fmt(row_energy[i]) << ',' << fmt(total > 0 ? acc / total : 0.0) << '\n';
  }
}

}  // namespace gsda
