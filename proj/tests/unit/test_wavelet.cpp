#include "helpers.hpp"

#include "rqgnn/error.hpp"
#include "rqgnn/verification.hpp"
#include "rqgnn/wavelet.hpp"

#include <doctest.h>

#include <cmath>

using namespace rqgnn;

namespace {

// c_0..c_5 of t * exp(1 - t) at lambda_max = 2, from a 30-digit quadrature
// (tests/oracles/frozen_values.py).
struct Frozen {
  double scale;
  double c[6];
};

constexpr Frozen kMexicanHat[] = {
    {0.5,
     {1.3281918274866849125, 0.47780017370587394592, -0.16217409281306317001,
      0.022076980248863988261, -0.0019155866264820802196, 0.00012258352355320016458}},
    {1.0,
     {1.4018135475190466168, 0.27149533953407656237, -0.31583218938274036732,
      0.094147940139421342555, -0.016965647638195141701, 0.0022166825706100701481}},
    {2.0,
     {1.013799879741377873, -0.1565253146399848245, -0.31305062927996964901,
      0.23117330654145375046, -0.089106653575562871133, 0.024042676042140117849}},
    {4.0,
     {0.61435521662403657515, -0.35743510105850188957, -0.050257492746483601993,
      0.23179136919229288458, -0.20102997098593440797, 0.11178028915920055521}},
};

Matrix random_features(int n, int f, Rng& rng) {
  Matrix x(n, f);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("frozen default-kernel coefficients") {
  for (const Frozen& f : kMexicanHat) {
    const Vector c = chebyshev_coefficients("mexican_hat", f.scale, 5, 2.0);
    for (int k = 0; k < 6; ++k) CHECK(c(k) == doctest::Approx(f.c[k]).epsilon(1e-12));
  }
}

TEST_CASE("constant and identity kernels") {
  const Vector one = chebyshev_coefficients("constant", 0.7, 8, 1.3);
  CHECK(one(0) == doctest::Approx(2.0).epsilon(1e-12));
  for (int k = 1; k <= 8; ++k) CHECK(std::abs(one(k)) <= 1e-10);

  const Vector lin = chebyshev_coefficients("identity", 1.0, 6, 2.0);
  CHECK(lin(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(lin(1) == doctest::Approx(1.0).epsilon(1e-12));
  for (int k = 2; k <= 6; ++k) CHECK(std::abs(lin(k)) <= 1e-10);

  Rng rng(6);
  const GraphRecord g = random_graph(9, 0.4, rng);
  const SparseSymMatrix l = build_laplacian(g, LaplacianMode::kNormalized);
  const Matrix x = random_features(9, 3, rng);
  CHECK((apply_chebyshev_filter(l, x, lin, 2.0) - l.multiply(x)).cwiseAbs().maxCoeff() <= 1e-9);
  const Vector two = (Vector(1) << 2.0).finished();
  CHECK(apply_chebyshev_filter(l, x, two, 2.0) == x);
}

TEST_CASE("edgeless graph filters by g(1)") {
  const GraphRecord g = testing::make_graph(5, {});
  const SparseSymMatrix l = build_laplacian(g, LaplacianMode::kNormalized);
  Rng rng(1);
  const Matrix x = random_features(5, 2, rng);
  const Vector c = chebyshev_coefficients("mexican_hat", 1.0, 24, 2.0);
  CHECK((apply_chebyshev_filter(l, x, c, 2.0) - x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("quadrature requirements and stability") {
  CHECK_THROWS_AS(chebyshev_coefficients("mexican_hat", 1.0, 24, 2.0, 32), ConfigError);
  CHECK_THROWS_AS(chebyshev_coefficients("nope", 1.0, 6, 2.0), ConfigError);
  for (const double scale : dyadic_scales(4, 1.87)) {
    const Vector a = chebyshev_coefficients("mexican_hat", scale, 24, 1.87, 256);
    const Vector b = chebyshev_coefficients("mexican_hat", scale, 24, 1.87, 512);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("dyadic scales") {
  const auto s = dyadic_scales(4, 2.0);
  REQUIRE(s.size() == 4);
  CHECK(s[0] == doctest::Approx(0.5));
  CHECK(s[1] == doctest::Approx(1.0));
  CHECK(s[2] == doctest::Approx(2.0));
  CHECK(s[3] == doctest::Approx(4.0));
}

TEST_CASE("bank layout") {
  const WaveletBank bank = make_wavelet_bank(4, 6, 2.0);
  REQUIRE(bank.coefficients.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(bank.coefficients[i].size() == 6 * (i + 1) + 1);
  CHECK(bank.width(64) == 256);

  Rng rng(3);
  const GraphRecord g = random_graph(8, 0.5, rng);
  const SparseSymMatrix l = build_laplacian(g, LaplacianMode::kNormalized);
  const Matrix x = random_features(8, 64, rng);
  const Matrix out = wavelet_features(l, x, bank);
  CHECK(out.rows() == 8);
  CHECK(out.cols() == 256);
  CHECK(wavelet_features(l, Matrix::Zero(8, 64), bank).cwiseAbs().maxCoeff() == 0.0);

  const WaveletBank single = make_wavelet_bank(1, 6, 2.0);
  CHECK(wavelet_features(l, x, single) ==
        apply_chebyshev_filter(l, x, single.coefficients[0], 2.0));
}

TEST_CASE("filter linearity") {
  Rng rng(12);
  const SparseSymMatrix l = build_laplacian(random_graph(10, 0.4, rng), LaplacianMode::kNormalized);
  const Vector c = chebyshev_coefficients("mexican_hat", 2.0, 12, 2.0);
  const Matrix x = random_features(10, 3, rng), y = random_features(10, 3, rng);
  const Matrix lhs = apply_chebyshev_filter(l, 2.5 * x - 0.75 * y, c, 2.0);
  const Matrix rhs = 2.5 * apply_chebyshev_filter(l, x, c, 2.0) - 0.75 * apply_chebyshev_filter(l, y, c, 2.0);
  CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
}

TEST_CASE("filter locality") {
  const GraphRecord g = testing::path_graph(12);
  const SparseSymMatrix l = build_laplacian(g, LaplacianMode::kNormalized);
  Matrix impulse = Matrix::Zero(12, 1);
  impulse(0, 0) = 1.0;
  for (const int order : {1, 3, 6}) {
    const Vector c = chebyshev_coefficients("mexican_hat", 1.0, order, 2.0);
    const Matrix out = apply_chebyshev_filter(l, impulse, c, 2.0);
    for (int v = order + 1; v < 12; ++v) CHECK(out(v, 0) == 0.0);
    CHECK(out(order, 0) != 0.0);
  }
}

TEST_CASE("exact oracle special kernels") {
  Rng rng(9);
  const SparseSymMatrix l = build_laplacian(random_graph(7, 0.5, rng), LaplacianMode::kNormalized);
  const auto d = eigendecompose_sym(l);
  const Matrix x = random_features(7, 2, rng);
  CHECK((exact_filter_oracle(l, d, x, "constant", 1.0) - x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((exact_filter_oracle(l, d, x, "identity", 1.0) - l.multiply(x)).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("Chebyshev output converges to the exact filter") {
  Rng rng(10);
  const GraphRecord g = random_graph(10, 0.35, rng);
  const SparseSymMatrix l = build_laplacian(g, LaplacianMode::kNormalized);
  const double domain = filter_domain(lambda_max(l, LaplacianMode::kNormalized));
  const auto d = eigendecompose_sym(l);
  CHECK(domain >= d.eigenvalues.maxCoeff());
  const Matrix x = random_features(10, 4, rng);
  for (const double scale : dyadic_scales(4, domain)) {
    const Matrix exact = exact_filter_oracle(l, d, x, "mexican_hat", scale);
    const Vector c = chebyshev_coefficients("mexican_hat", scale, 24, domain);
    CHECK((apply_chebyshev_filter(l, x, c, domain) - exact).cwiseAbs().maxCoeff() <= 1e-6);
  }
  const ChebyshevTrialsReport r = check_chebyshev_convergence(50, 16, 4);
  CHECK(r.max_error_order24 <= 1e-6);
  CHECK(r.monotonicity_failures == 0);
}

TEST_CASE("filter domain rounding") {
  CHECK(filter_domain(1.234) == doctest::Approx(1.24));
  CHECK(filter_domain(1.23) == doctest::Approx(1.23));
  CHECK(filter_domain(2.0000001) == 2.0);
  CHECK(filter_domain(0.0) == doctest::Approx(0.01));
}

TEST_CASE("bank cache and serialisation") {
  WaveletBankCache cache(4, 6);
  const WaveletBank& a = cache.get(1.87);
  const WaveletBank& b = cache.get(1.87);
  CHECK(&a == &b);
  CHECK(cache.get(2.0).lambda_max == 2.0);

  const auto doc = to_json(a);
  for (const char* key : {"q", "K", "lambda_max", "kernel_id", "scales", "coefficients"}) {
    CHECK(doc.contains(key));
  }
  const WaveletBank back = wavelet_bank_from_json(nlohmann::json::parse(doc.dump()));
  CHECK(back.q == a.q);
  CHECK(back.scales == a.scales);
  for (int i = 0; i < a.q; ++i) CHECK(back.coefficients[i] == a.coefficients[i]);
}
