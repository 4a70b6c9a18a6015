#pragma once

#include "rqgnn/linalg.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace rqgnn {

/// Spectral kernel g(t). Known ids: "mexican_hat" (t * exp(1 - t), the default),
/// "identity" (t) and "constant" (1).
using Kernel = std::function<double(double)>;
Kernel kernel_by_id(const std::string& kernel_id);

inline constexpr const char* kDefaultKernel = "mexican_hat";

/// Coefficients c_0..c_order of g(scale * lambda) on [0, lambda_max] in the
/// shifted Chebyshev basis, by the composite midpoint rule on [0, pi]:
///   c_k = (2/pi) * int_0^pi cos(k theta) g(scale * lambda_max * (cos theta + 1) / 2) d theta.
/// quad_points = 0 selects max(256, 4 * order).
Vector chebyshev_coefficients(const std::string& kernel_id, double scale, int order,
                              double lambda_max, int quad_points = 0);

/// (c_0 / 2) X + sum_k c_k T_k(L) X with the recurrence on y = 2L/lambda_max - I.
/// Cost O(order * nnz * d); no dense polynomial of L is formed.
Matrix apply_chebyshev_filter(const SparseSymMatrix& laplacian, const Matrix& x,
                              const Vector& coeffs, double lambda_max);

struct WaveletBank {
  int q = 4;
  int K = 6;
  double lambda_max = 2.0;
  std::string kernel_id = kDefaultKernel;
  std::vector<double> scales;
  std::vector<Vector> coefficients;  // wavelet i (1-based) holds i*K + 1 entries

  int width(int feature_dim) const noexcept { return q * feature_dim; }
};

/// tau_i = 2^{i-2} * (2 / lambda_max): kernel peaks at lambda_max, lambda_max/2, ...
std::vector<double> dyadic_scales(int q, double lambda_max);

WaveletBank make_wavelet_bank(int q, int K, double lambda_max,
                              const std::string& kernel_id = kDefaultKernel);

/// Horizontal concatenation [f_1(L) X | ... | f_q(L) X].
Matrix wavelet_features(const SparseSymMatrix& laplacian, const Matrix& x, const WaveletBank& bank);

/// Dense ground truth U g(scale * Lambda) U^T X.
Matrix exact_filter_oracle(const SparseSymMatrix& laplacian, const SpectralDecomposition& decomp,
                           const Matrix& x, const std::string& kernel_id, double scale);
Matrix exact_filter_oracle(const SpectralDecomposition& decomp, const Matrix& x,
                           const std::string& kernel_id, double scale);

/// Chebyshev domain used for a normalized Laplacian: its estimated largest
/// eigenvalue rounded up to two decimals, capped at 2.
double filter_domain(double lambda_estimate);

/// Banks keyed by filter domain, built on first use.
class WaveletBankCache {
 public:
  WaveletBankCache(int q, int K, std::string kernel_id = kDefaultKernel);

  const WaveletBank& get(double domain);
  int q() const noexcept { return q_; }
  int K() const noexcept { return K_; }
  const std::string& kernel_id() const noexcept { return kernel_id_; }

 private:
  int q_;
  int K_;
  std::string kernel_id_;
  std::map<long, WaveletBank> banks_;
};

nlohmann::json to_json(const WaveletBank& bank);
WaveletBank wavelet_bank_from_json(const nlohmann::json& doc);

}  // namespace rqgnn
