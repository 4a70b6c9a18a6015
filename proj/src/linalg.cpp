#include "rqgnn/linalg.hpp"

#include "rqgnn/error.hpp"
#include "rqgnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rqgnn {

SparseSymMatrix::SparseSymMatrix(int dim, std::vector<int> row_offsets,
                                 std::vector<int> col_indices, std::vector<double> values)
    : dim_(dim),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (dim_ < 0 || row_offsets_.size() != static_cast<std::size_t>(dim_) + 1 ||
      row_offsets_.front() != 0 || col_indices_.size() != values_.size() ||
      static_cast<std::size_t>(row_offsets_.back()) != values_.size()) {
    throw ContractError("inconsistent CSR triplet");
  }
  for (int r = 0; r < dim_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1]) throw ContractError("row offsets decrease");
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] < 0 || col_indices_[k] >= dim_) {
        throw ContractError("column index out of range");
      }
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1]) {
        throw ContractError("column indices not strictly increasing within a row");
      }
      if (!std::isfinite(values_[k])) throw ContractError("non-finite matrix entry");
    }
  }
  for (int r = 0; r < dim_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const int c = col_indices_[k];
      const auto begin = col_indices_.begin() + row_offsets_[c];
      const auto end = col_indices_.begin() + row_offsets_[c + 1];
      const auto it = std::lower_bound(begin, end, r);
      if (it == end || *it != r || values_[it - col_indices_.begin()] != values_[k]) {
        throw ContractError("sparsity pattern is not symmetric");
      }
    }
  }
}

SparseSymMatrix SparseSymMatrix::from_dense(const Matrix& dense) {
  if (dense.rows() != dense.cols()) throw ShapeError("matrix must be square");
  const int n = static_cast<int>(dense.rows());
  std::vector<int> offsets{0};
  std::vector<int> cols;
  std::vector<double> vals;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (dense(r, c) != 0.0) {
        cols.push_back(c);
        vals.push_back(dense(r, c));
      }
    }
    offsets.push_back(static_cast<int>(vals.size()));
  }
  return SparseSymMatrix(n, std::move(offsets), std::move(cols), std::move(vals));
}

void SparseSymMatrix::multiply(const Matrix& x, Matrix& out) const {
  if (x.rows() != dim_) throw ShapeError("sparse multiply: row mismatch");
  out.setZero(dim_, x.cols());
  for (int r = 0; r < dim_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      out.row(r).noalias() += values_[k] * x.row(col_indices_[k]);
    }
  }
}

Matrix SparseSymMatrix::multiply(const Matrix& x) const {
  Matrix out;
  multiply(x, out);
  return out;
}

Matrix SparseSymMatrix::to_dense() const {
  Matrix dense = Matrix::Zero(dim_, dim_);
  for (int r = 0; r < dim_; ++r) {
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      dense(r, col_indices_[k]) = values_[k];
    }
  }
  return dense;
}

double SparseSymMatrix::frobenius_norm() const {
  double sum = 0.0;
  for (const double v : values_) sum += v * v;
  return std::sqrt(sum);
}

double SparseSymMatrix::max_abs() const {
  double m = 0.0;
  for (const double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double SparseSymMatrix::gershgorin_bound() const {
  double bound = 0.0;
  for (int r = 0; r < dim_; ++r) {
    double row = 0.0;
    for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) row += std::abs(values_[k]);
    bound = std::max(bound, row);
  }
  return bound;
}

SparseSymMatrix build_laplacian(const GraphRecord& graph, LaplacianMode mode) {
  const int n = graph.node_count;
  std::vector<std::vector<int>> neighbours(static_cast<std::size_t>(n));
  for (const auto& [i, j] : graph.edges) {
    neighbours[i].push_back(j);
    neighbours[j].push_back(i);
  }
  std::vector<double> inv_sqrt_degree(static_cast<std::size_t>(n), 0.0);
  for (int v = 0; v < n; ++v) {
    std::sort(neighbours[v].begin(), neighbours[v].end());
    if (!neighbours[v].empty()) {
      inv_sqrt_degree[v] = 1.0 / std::sqrt(static_cast<double>(neighbours[v].size()));
    }
  }

  std::vector<int> offsets{0};
  std::vector<int> cols;
  std::vector<double> vals;
  cols.reserve(2 * graph.edges.size() + static_cast<std::size_t>(n));
  vals.reserve(cols.capacity());
  for (int v = 0; v < n; ++v) {
    const double diagonal =
        mode == LaplacianMode::kRegular ? static_cast<double>(neighbours[v].size()) : 1.0;
    bool diagonal_done = false;
    auto emit_diagonal = [&] {
      cols.push_back(v);
      vals.push_back(diagonal);
      diagonal_done = true;
    };
    for (const int u : neighbours[v]) {
      if (!diagonal_done && u > v) emit_diagonal();
      cols.push_back(u);
      vals.push_back(mode == LaplacianMode::kRegular ? -1.0
                                                     : -inv_sqrt_degree[v] * inv_sqrt_degree[u]);
    }
    if (!diagonal_done) emit_diagonal();
    offsets.push_back(static_cast<int>(vals.size()));
  }
  return SparseSymMatrix(n, std::move(offsets), std::move(cols), std::move(vals));
}

Matrix SpectralDecomposition::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

SpectralDecomposition eigendecompose_sym(const Matrix& matrix, int cap) {
  if (matrix.rows() != matrix.cols()) throw ShapeError("eigendecomposition needs a square matrix");
  const int n = static_cast<int>(matrix.rows());
  if (n > cap) {
    throw OracleCapacityError("oracle capacity " + std::to_string(cap) + " exceeded by dimension " +
                              std::to_string(n));
  }
  Matrix a = 0.5 * (matrix + matrix.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double threshold = 1e-12 * a.norm();

  auto off_diagonal_norm = [&] {
    double sum = 0.0;
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < n; ++r) {
        if (r != c) sum += a(r, c) * a(r, c);
      }
    }
    return std::sqrt(sum);
  };

  constexpr int kMaxSweeps = 100;
  int sweep = 0;
  while (off_diagonal_norm() > threshold) {
    if (++sweep > kMaxSweeps) throw NumericalError("Jacobi iteration did not converge");
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        // Rotation angle chosen so that the (p, q) entry vanishes; t is the
        // smaller root of t^2 + 2 theta t - 1 = 0.
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });
  SpectralDecomposition out{Vector(n), Matrix(n, n)};
  for (int k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[k], order[k]);
    out.eigenvectors.col(k) = v.col(order[k]);
  }
  return out;
}

SpectralDecomposition eigendecompose_sym(const SparseSymMatrix& matrix, int cap) {
  if (matrix.dim() > cap) {
    throw OracleCapacityError("oracle capacity " + std::to_string(cap) + " exceeded by dimension " +
                              std::to_string(matrix.dim()));
  }
  return eigendecompose_sym(matrix.to_dense(), cap);
}

double spectral_norm_sym(const Matrix& matrix) {
  if (matrix.size() == 0) return 0.0;
  const auto decomp = eigendecompose_sym(matrix);
  return std::max(std::abs(decomp.eigenvalues(0)),
                  std::abs(decomp.eigenvalues(decomp.dim() - 1)));
}

double lambda_max(const SparseSymMatrix& matrix, LaplacianMode mode, double tol, int max_iters) {
  const int n = matrix.dim();
  if (n == 0 || matrix.max_abs() == 0.0) return 0.0;
  Rng rng(0x5eedULL);
  Matrix v(n, 1);
  for (int i = 0; i < n; ++i) v(i, 0) = rng.uniform(0.5, 1.5) * (i % 2 == 0 ? 1.0 : -1.0);
  v /= v.norm();
  Matrix w;
  double previous = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    matrix.multiply(v, w);
    const double estimate = v.col(0).dot(w.col(0));
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    if (iter > 0 && std::abs(estimate - previous) <= tol * std::abs(estimate)) return estimate;
    previous = estimate;
    v = w / norm;
  }
  return mode == LaplacianMode::kNormalized ? 2.0 : matrix.gershgorin_bound();
}

Vector rayleigh_quotient(const SparseSymMatrix& laplacian, const Matrix& x) {
  if (x.rows() != laplacian.dim()) {
    throw ShapeError("rayleigh_quotient: signal has " + std::to_string(x.rows()) +
                     " rows, matrix has dimension " + std::to_string(laplacian.dim()));
  }
  const Matrix lx = laplacian.multiply(x);
  Vector out(x.cols());
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    out(f) = x.col(f).dot(lx.col(f)) / (x.col(f).squaredNorm() + kRayleighEpsilon);
  }
  return out;
}

}  // namespace rqgnn
