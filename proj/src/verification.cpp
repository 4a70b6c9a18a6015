#include "rqgnn/verification.hpp"

#include "rqgnn/spectral.hpp"
#include "rqgnn/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rqgnn {

GraphRecord random_graph(int n, double edge_prob, Rng& rng) {
  GraphRecord g;
  g.node_count = n;
  g.features = Matrix::Ones(n, 1);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.bernoulli(edge_prob)) g.edges.emplace_back(i, j);
    }
  }
  return g;
}

Matrix random_symmetric(int n, double norm, Rng& rng) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = rng.normal();
  }
  const double current = spectral_norm_sym(m);
  return current > 0.0 ? Matrix(m * (norm / current)) : m;
}

namespace {

Vector random_signal(int n, Rng& rng) {
  Vector x(n);
  do {
    for (int i = 0; i < n; ++i) x(i) = rng.normal();
  } while (x.squaredNorm() == 0.0);
  return x;
}

}  // namespace

EnergyIdentityReport check_energy_identity(int graphs, int signals_per_graph, int max_nodes,
                                           std::uint64_t seed) {
  Rng rng(seed);
  EnergyIdentityReport report;
  for (int g = 0; g < graphs; ++g) {
    const int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_nodes - 1)));
    const GraphRecord graph = random_graph(n, rng.uniform(0.1, 0.9), rng);
    const SparseSymMatrix l = build_laplacian(graph, LaplacianMode::kRegular);
    const SpectralDecomposition decomp = eigendecompose_sym(l);
    for (int s = 0; s < signals_per_graph; ++s) {
      const Vector x = random_signal(n, rng);
      const double integral = accumulated_energy_integral(decomp, x);
      const double rq = rayleigh_quotient(l, x)(0);
      report.max_abs_error = std::max(report.max_abs_error, std::abs(integral - rq));
      ++report.cases;
    }
  }
  return report;
}

PerturbationTrialsReport check_perturbation_bounds(int trials, int n, std::uint64_t seed) {
  Rng rng(seed);
  PerturbationTrialsReport report;
  for (int t = 0; t < trials; ++t) {
    const GraphRecord graph = random_graph(n, rng.uniform(0.2, 0.8), rng);
    const SparseSymMatrix l = build_laplacian(graph, LaplacianMode::kRegular);
    Vector x = random_signal(n, rng);
    x.normalize();
    const Matrix delta = random_symmetric(n, rng.uniform(1e-3, 3.0), rng);
    Vector dx = random_signal(n, rng);
    dx *= rng.uniform() / dx.norm();
    const PerturbationReport r = verify_perturbation_bounds(l, x, delta, dx);
    if (!r.matrix_bound_holds) ++report.bound_violations;
    if (r.delta_norm > 0.0) {
      report.max_bound_slack_used = std::max(report.max_bound_slack_used, r.rq_change / r.delta_norm);
    }
    report.max_identity_residual = std::max(report.max_identity_residual, r.identity_residual);
    ++report.trials;
  }
  return report;
}

ChebyshevTrialsReport check_chebyshev_convergence(int trials, int max_nodes, std::uint64_t seed,
                                                  const std::string& kernel_id) {
  Rng rng(seed);
  ChebyshevTrialsReport report;
  constexpr int kOrders[] = {6, 12, 24};
  for (int t = 0; t < trials; ++t) {
    const int n = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_nodes - 1)));
    const GraphRecord graph = random_graph(n, rng.uniform(0.15, 0.7), rng);
    const SparseSymMatrix l = build_laplacian(graph, LaplacianMode::kNormalized);
    const double domain = filter_domain(lambda_max(l, LaplacianMode::kNormalized));
    const SpectralDecomposition decomp = eigendecompose_sym(l);
    Matrix x(n, 3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    bool monotone = true;
    for (const double scale : dyadic_scales(4, domain)) {
      const Matrix exact = exact_filter_oracle(l, decomp, x, kernel_id, scale);
      double previous = std::numeric_limits<double>::infinity();
      for (const int order : kOrders) {
        const Vector coeffs = chebyshev_coefficients(kernel_id, scale, order, domain);
        const double err =
            (apply_chebyshev_filter(l, x, coeffs, domain) - exact).cwiseAbs().maxCoeff();
        if (err > previous + 1e-12) monotone = false;
        previous = err;
        if (order == 24) report.max_error_order24 = std::max(report.max_error_order24, err);
      }
    }
    if (!monotone) ++report.monotonicity_failures;
    ++report.trials;
  }
  return report;
}

std::vector<GraphRecord> gradient_fixture() {
  auto make = [](std::vector<Edge> edges, std::vector<int> labels, int label) {
    GraphRecord g;
    g.node_count = 6;
    g.edges = canonical_edges(std::move(edges));
    g.features = Matrix::Zero(6, 3);
    for (int v = 0; v < 6; ++v) g.features(v, labels[v]) = 1.0;
    g.label = label;
    return g;
  };
  return {
      make({{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 0}}, {0, 1, 0, 2, 0, 1}, kNormal),
      make({{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}, {1, 2}}, {1, 0, 0, 2, 2, 0}, kNormal),
      make({{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}, {3, 4}, {4, 5}, {2, 5}},
           {2, 2, 1, 0, 1, 0}, kAnomalous),
  };
}

LossConfig gradient_fixture_loss(double beta, double gamma) {
  LossConfig loss;
  loss.beta = beta;
  loss.gamma = gamma;
  loss.normal_count = 665;
  loss.anomalous_count = 35;
  return loss;
}

nlohmann::json to_json(const EnergyIdentityReport& r) {
  return {{"cases", r.cases}, {"max_abs_error", r.max_abs_error}};
}

nlohmann::json to_json(const PerturbationTrialsReport& r) {
  return {{"trials", r.trials},
          {"bound_violations", r.bound_violations},
          {"max_change_over_norm", r.max_bound_slack_used},
          {"max_identity_residual", r.max_identity_residual}};
}

nlohmann::json to_json(const ChebyshevTrialsReport& r) {
  return {{"trials", r.trials},
          {"max_error_order24", r.max_error_order24},
          {"monotonicity_failures", r.monotonicity_failures}};
}

nlohmann::json to_json(const GradientCheckResult& r) {
  return {{"max_relative_error", r.max_relative_error},
          {"worst_parameter", r.worst_parameter},
          {"checked", r.checked},
          {"kink_crossings", r.kink_crossings}};
}

}  // namespace rqgnn
