#pragma once

#include "rqgnn/dataset.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rqgnn {

/// Compressed-sparse-row storage of a symmetric matrix; both triangles are stored.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  /// Takes ownership of a CSR triplet and checks finiteness, ordering and symmetry.
  SparseSymMatrix(int dim, std::vector<int> row_offsets, std::vector<int> col_indices,
                  std::vector<double> values);

  /// Builds from a dense symmetric matrix, dropping exact zeros.
  static SparseSymMatrix from_dense(const Matrix& dense);

  int dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return values_.size(); }
  const std::vector<int>& row_offsets() const noexcept { return row_offsets_; }
  const std::vector<int>& col_indices() const noexcept { return col_indices_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// out = M * x for an n x d block.
  void multiply(const Matrix& x, Matrix& out) const;
  Matrix multiply(const Matrix& x) const;

  Matrix to_dense() const;
  double frobenius_norm() const;
  double max_abs() const;
  /// Largest absolute row sum (Gershgorin radius bound).
  double gershgorin_bound() const;

 private:
  int dim_ = 0;
  std::vector<int> row_offsets_{0};
  std::vector<int> col_indices_;
  std::vector<double> values_;
};

enum class LaplacianMode { kRegular, kNormalized };

/// D - A, or I - D^{-1/2} A D^{-1/2} with D^{-1/2}_ii = 0 for isolated nodes.
SparseSymMatrix build_laplacian(const GraphRecord& graph, LaplacianMode mode);

/// Ascending eigenvalues with matching orthonormal eigenvector columns.
struct SpectralDecomposition {
  Vector eigenvalues;
  Matrix eigenvectors;

  int dim() const noexcept { return static_cast<int>(eigenvalues.size()); }
  Matrix reconstruct() const;
};

constexpr int kOracleCap = 256;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm is at most
/// 1e-12 * ||M||_F. Raises OracleCapacityError above `cap`.
SpectralDecomposition eigendecompose_sym(const Matrix& matrix, int cap = kOracleCap);
SpectralDecomposition eigendecompose_sym(const SparseSymMatrix& matrix, int cap = kOracleCap);

/// Spectral norm of a symmetric matrix via the oracle.
double spectral_norm_sym(const Matrix& matrix);

/// Largest eigenvalue of a PSD matrix by power iteration from a fixed seeded
/// start. The estimate is a Rayleigh quotient, hence never above the true value.
/// Falls back to 2.0 (normalized) or the Gershgorin bound (regular) when the
/// relative change still exceeds `tol` after `max_iters` iterations.
double lambda_max(const SparseSymMatrix& matrix, LaplacianMode mode, double tol = 1e-10,
                  int max_iters = 2000);

constexpr double kRayleighEpsilon = 1e-12;

/// Column-wise x_f^T L x_f / (x_f^T x_f + 1e-12).
Vector rayleigh_quotient(const SparseSymMatrix& laplacian, const Matrix& x);

}  // namespace rqgnn
