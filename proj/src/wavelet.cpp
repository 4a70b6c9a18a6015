#include "rqgnn/wavelet.hpp"

#include "rqgnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace rqgnn {

Kernel kernel_by_id(const std::string& kernel_id) {
  if (kernel_id == "mexican_hat") return [](double t) { return t * std::exp(1.0 - t); };
  if (kernel_id == "identity") return [](double t) { return t; };
  if (kernel_id == "constant") return [](double) { return 1.0; };
  throw ConfigError("unknown kernel id '" + kernel_id + "'");
}

Vector chebyshev_coefficients(const std::string& kernel_id, double scale, int order,
                              double lambda_max, int quad_points) {
  if (order < 0) throw ConfigError("Chebyshev order must be non-negative");
  if (!(scale > 0.0)) throw ConfigError("wavelet scale must be positive");
  if (!(lambda_max > 0.0)) throw ConfigError("lambda_max must be positive");
  const int required = std::max(64, 4 * order);
  if (quad_points == 0) quad_points = std::max(256, 4 * order);
  if (quad_points < required) {
    throw ConfigError("need at least " + std::to_string(required) + " quadrature points");
  }
  const Kernel g = kernel_by_id(kernel_id);
  std::vector<double> samples(static_cast<std::size_t>(quad_points));
  std::vector<double> thetas(samples.size());
  for (int m = 0; m < quad_points; ++m) {
    const double theta = std::numbers::pi * (m + 0.5) / quad_points;
    thetas[m] = theta;
    samples[m] = g(scale * lambda_max * (std::cos(theta) + 1.0) / 2.0);
  }
  Vector coeffs(order + 1);
  for (int k = 0; k <= order; ++k) {
    double sum = 0.0;
    for (int m = 0; m < quad_points; ++m) sum += std::cos(k * thetas[m]) * samples[m];
    // (2/pi) * (pi / N) * sum
    coeffs(k) = 2.0 * sum / quad_points;
  }
  return coeffs;
}

Matrix apply_chebyshev_filter(const SparseSymMatrix& laplacian, const Matrix& x,
                              const Vector& coeffs, double lambda_max) {
  if (x.rows() != laplacian.dim()) throw ShapeError("filter input rows differ from Laplacian");
  if (coeffs.size() < 1) throw ContractError("filter needs at least one coefficient");
  if (!(lambda_max > 0.0)) throw ContractError("lambda_max must be positive");

  Matrix out = 0.5 * coeffs(0) * x;
  if (coeffs.size() == 1) return out;

  const double a = 2.0 / lambda_max;
  Matrix prev = x;
  Matrix lx;
  laplacian.multiply(x, lx);
  Matrix cur = a * lx - x;
  out.noalias() += coeffs(1) * cur;
  Matrix next;
  for (Eigen::Index k = 2; k < coeffs.size(); ++k) {
    laplacian.multiply(cur, lx);
    next = 2.0 * (a * lx - cur) - prev;
    out.noalias() += coeffs(k) * next;
    prev.swap(cur);
    cur.swap(next);
  }
  return out;
}

std::vector<double> dyadic_scales(int q, double lambda_max) {
  std::vector<double> scales(static_cast<std::size_t>(q));
  for (int i = 1; i <= q; ++i) scales[i - 1] = std::ldexp(2.0 / lambda_max, i - 2);
  return scales;
}

WaveletBank make_wavelet_bank(int q, int K, double lambda_max, const std::string& kernel_id) {
  if (q < 1 || K < 1) throw ConfigError("wavelet bank needs q >= 1 and K >= 1");
  WaveletBank bank;
  bank.q = q;
  bank.K = K;
  bank.lambda_max = lambda_max;
  bank.kernel_id = kernel_id;
  bank.scales = dyadic_scales(q, lambda_max);
  for (int i = 1; i <= q; ++i) {
    bank.coefficients.push_back(
        chebyshev_coefficients(kernel_id, bank.scales[i - 1], i * K, lambda_max));
  }
  return bank;
}

Matrix wavelet_features(const SparseSymMatrix& laplacian, const Matrix& x, const WaveletBank& bank) {
  const Eigen::Index d = x.cols();
  Matrix out(x.rows(), bank.q * d);
  for (int i = 0; i < bank.q; ++i) {
    out.middleCols(i * d, d) =
        apply_chebyshev_filter(laplacian, x, bank.coefficients[i], bank.lambda_max);
  }
  return out;
}

Matrix exact_filter_oracle(const SpectralDecomposition& decomp, const Matrix& x,
                           const std::string& kernel_id, double scale) {
  if (x.rows() != decomp.dim()) throw ShapeError("oracle input rows differ from decomposition");
  const Kernel g = kernel_by_id(kernel_id);
  Vector response(decomp.dim());
  for (int j = 0; j < decomp.dim(); ++j) response(j) = g(scale * decomp.eigenvalues(j));
  const Matrix& u = decomp.eigenvectors;
  return u * (response.asDiagonal() * (u.transpose() * x));
}

Matrix exact_filter_oracle(const SparseSymMatrix& laplacian, const SpectralDecomposition& decomp,
                           const Matrix& x, const std::string& kernel_id, double scale) {
  if (laplacian.dim() != decomp.dim()) throw ShapeError("decomposition of a different matrix");
  return exact_filter_oracle(decomp, x, kernel_id, scale);
}

double filter_domain(double lambda_estimate) {
  const double rounded = std::ceil(lambda_estimate * 100.0 - 1e-9) / 100.0;
  return std::clamp(rounded, 0.01, 2.0);
}

WaveletBankCache::WaveletBankCache(int q, int K, std::string kernel_id)
    : q_(q), K_(K), kernel_id_(std::move(kernel_id)) {
  kernel_by_id(kernel_id_);
}

const WaveletBank& WaveletBankCache::get(double domain) {
  const long key = std::lround(domain * 100.0);
  auto it = banks_.find(key);
  if (it == banks_.end()) {
    it = banks_.emplace(key, make_wavelet_bank(q_, K_, static_cast<double>(key) / 100.0, kernel_id_))
             .first;
  }
  return it->second;
}

nlohmann::json to_json(const WaveletBank& bank) {
  auto coefficients = nlohmann::json::array();
  for (const auto& c : bank.coefficients) {
    coefficients.push_back(std::vector<double>(c.data(), c.data() + c.size()));
  }
  return {{"q", bank.q},
          {"K", bank.K},
          {"lambda_max", bank.lambda_max},
          {"kernel_id", bank.kernel_id},
          {"scales", bank.scales},
          {"coefficients", coefficients}};
}

WaveletBank wavelet_bank_from_json(const nlohmann::json& doc) {
  WaveletBank bank;
  bank.q = doc.at("q").get<int>();
  bank.K = doc.at("K").get<int>();
  bank.lambda_max = doc.at("lambda_max").get<double>();
  bank.kernel_id = doc.at("kernel_id").get<std::string>();
  bank.scales = doc.at("scales").get<std::vector<double>>();
  for (const auto& c : doc.at("coefficients")) {
    const auto values = c.get<std::vector<double>>();
    bank.coefficients.emplace_back(Eigen::Map<const Vector>(values.data(),
                                                            static_cast<Eigen::Index>(values.size())));
  }
  if (static_cast<int>(bank.coefficients.size()) != bank.q ||
      static_cast<int>(bank.scales.size()) != bank.q) {
    throw ConfigError("wavelet bank document has inconsistent q");
  }
  for (int i = 0; i < bank.q; ++i) {
    if (bank.coefficients[i].size() != (i + 1) * bank.K + 1) {
      throw ConfigError("wavelet " + std::to_string(i + 1) + " has the wrong coefficient count");
    }
  }
  return bank;
}

}  // namespace rqgnn
