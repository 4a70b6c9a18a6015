#pragma once

#include "rqgnn/dataset.hpp"
#include "rqgnn/model.hpp"
#include "rqgnn/training.hpp"

#include <json.hpp>

#include <vector>

namespace rqgnn {

/// G(n, p) graph with all-ones features (F = 1); may be disconnected.
GraphRecord random_graph(int n, double edge_prob, Rng& rng);

/// Random symmetric matrix with i.i.d. normal entries, rescaled so that its
/// spectral norm equals `norm`.
Matrix random_symmetric(int n, double norm, Rng& rng);

/// Worst-case deviation between the accumulated-energy integral and x^T L x / x^T x.
struct EnergyIdentityReport {
  int cases = 0;
  double max_abs_error = 0.0;
};
EnergyIdentityReport check_energy_identity(int graphs, int signals_per_graph, int max_nodes,
                                           std::uint64_t seed);

/// Monte-Carlo check of |dRQ| <= ||Delta||_2 and of the exact quadratic expansion.
/// Each trial draws a random graph on n nodes, a unit signal, a symmetric
/// Delta with spectral norm in [1e-3, 3] and a signal perturbation of norm up to 1.
struct PerturbationTrialsReport {
  int trials = 0;
  int bound_violations = 0;
  double max_bound_slack_used = 0.0;  // max |dRQ| / ||Delta||_2
  double max_identity_residual = 0.0;
};
PerturbationTrialsReport check_perturbation_bounds(int trials, int n, std::uint64_t seed);

/// Chebyshev filter vs exact eigendecomposition filter for every wavelet scale
/// of a default bank; orders 6, 12 and 24.
struct ChebyshevTrialsReport {
  int trials = 0;
  double max_error_order24 = 0.0;
  int monotonicity_failures = 0;
};
ChebyshevTrialsReport check_chebyshev_convergence(int trials, int max_nodes, std::uint64_t seed,
                                                  const std::string& kernel_id = kDefaultKernel);

/// Three 6-node graphs (F = 3, both classes) used by the gradient check.
std::vector<GraphRecord> gradient_fixture();

/// Loss settings for the gradient check. The class counts are those of the
/// train split of a 1000-graph corpus with 5% anomalies, so the class weights
/// and the loss scale match an actual training run.
LossConfig gradient_fixture_loss(double beta = 0.999, double gamma = 1.5);

nlohmann::json to_json(const EnergyIdentityReport& r);
nlohmann::json to_json(const PerturbationTrialsReport& r);
nlohmann::json to_json(const ChebyshevTrialsReport& r);
nlohmann::json to_json(const GradientCheckResult& r);

}  // namespace rqgnn
