#pragma once

#include "rqgnn/dataset.hpp"
#include "rqgnn/linalg.hpp"

#include <json.hpp>

#include <optional>
#include <vector>

namespace rqgnn {

/// Distribution of a signal's energy over the Laplacian eigenvalues.
class EnergyProfile {
 public:
  EnergyProfile(Vector eigenvalues, Vector energies);

  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  const Vector& energies() const noexcept { return energies_; }

  /// High-frequency energy E(t) = 1 - sum of energies at eigenvalues <= t.
  double high_frequency_energy(double t) const;

 private:
  Vector eigenvalues_;
  Vector energies_;
};

/// x_hat = U^T x and energies x_hat_k^2 / sum x_hat_i^2.
EnergyProfile energy_profile(const SpectralDecomposition& decomp, const Vector& x);

/// Integral of E(t) over [0, lambda_n], evaluated exactly on the piecewise
/// constant segments. Equals the Rayleigh quotient of x.
double accumulated_energy_integral(const SpectralDecomposition& decomp, const Vector& x);

/// Ten-bin (by default) class-conditional histogram of pooled RQ components.
struct RQHistogram {
  std::vector<double> bin_edges;
  std::vector<double> freq_normal;
  std::vector<double> freq_anomalous;
  std::size_t normal_samples = 0;
  std::size_t anomalous_samples = 0;
  std::size_t normal_values = 0;
  std::size_t anomalous_values = 0;
};

/// RQ vector of the raw features under the regular Laplacian.
Vector raw_rq_vector(const GraphRecord& graph);

/// Pools every RQ component of every graph, bins on [min, max] with the maximum
/// assigned to the last bin and normalises each class separately. When all
/// values coincide the histogram collapses to a single bin.
RQHistogram rq_histogram(const std::vector<GraphRecord>& graphs, int bins = 10);

/// Total-variation distance 0.5 * sum |p - q|.
double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// Histogram of a set of values on fixed edges, normalised to sum 1 (all zeros
/// when `values` is empty).
std::vector<double> binned_frequencies(const std::vector<double>& values,
                                       const std::vector<double>& edges);

nlohmann::json to_json(const RQHistogram& histogram);

/// Per-bin inter/intra distance ratios. Undefined ratios (zero intra distance)
/// are std::nullopt.
struct DistanceRatios {
  std::vector<double> bin_edges;
  std::vector<double> inter;
  std::vector<double> intra_anomalous;
  std::vector<double> intra_normal;
  std::vector<std::optional<double>> inter_over_anomalous;
  std::vector<std::optional<double>> inter_over_normal;
};

DistanceRatios distance_ratios(const std::vector<GraphRecord>& anomalous,
                               const std::vector<GraphRecord>& normal, int subsamples,
                               std::uint64_t seed, int bins = 10);

nlohmann::json to_json(const DistanceRatios& ratios);

struct PerturbationReport {
  // Matrix perturbation L -> L + delta_matrix.
  double rq_change = 0.0;
  double delta_norm = 0.0;
  bool matrix_bound_holds = true;
  // Signal perturbation x -> x + delta_signal.
  double quadratic_change = 0.0;
  double linear_term = 0.0;
  double second_order_term = 0.0;
  double identity_residual = 0.0;
};

/// Checks |RQ(x, L + Delta) - RQ(x, L)| <= ||Delta||_2 (+1e-10) and the exact
/// expansion (x+d)^T L (x+d) - x^T L x = 2 x^T L d + d^T L d.
PerturbationReport verify_perturbation_bounds(const SparseSymMatrix& laplacian, const Vector& x,
                                              const Matrix& delta_matrix,
                                              const Vector& delta_signal);

}  // namespace rqgnn
