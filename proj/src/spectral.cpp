#include "rqgnn/spectral.hpp"

#include "rqgnn/error.hpp"
#include "rqgnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rqgnn {

EnergyProfile::EnergyProfile(Vector eigenvalues, Vector energies)
    : eigenvalues_(std::move(eigenvalues)), energies_(std::move(energies)) {
  if (eigenvalues_.size() != energies_.size()) throw ShapeError("energy profile size mismatch");
}

double EnergyProfile::high_frequency_energy(double t) const {
  double low = 0.0;
  for (Eigen::Index j = 0; j < eigenvalues_.size() && eigenvalues_(j) <= t; ++j) {
    low += energies_(j);
  }
  return 1.0 - low;
}

EnergyProfile energy_profile(const SpectralDecomposition& decomp, const Vector& x) {
  if (x.size() != decomp.dim()) throw ShapeError("signal length differs from decomposition");
  const double total = x.squaredNorm();
  if (total == 0.0) throw DegenerateSignalError("energy profile of the zero signal");
  const Vector spectrum = decomp.eigenvectors.transpose() * x;
  const Vector squared = spectrum.array().square();
  return EnergyProfile(decomp.eigenvalues, squared / squared.sum());
}

double accumulated_energy_integral(const SpectralDecomposition& decomp, const Vector& x) {
  const EnergyProfile profile = energy_profile(decomp, x);
  const Vector& lambda = profile.eigenvalues();
  const Vector& energy = profile.energies();
  const Eigen::Index n = lambda.size();
  // [0, lambda_1) carries E = 1; on [lambda_k, lambda_{k+1}) E is one minus the
  // energy accumulated through index k.
  double integral = lambda(0);
  double accumulated = 0.0;
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    accumulated += energy(k);
    integral += (1.0 - accumulated) * (lambda(k + 1) - lambda(k));
  }
  return integral;
}

Vector raw_rq_vector(const GraphRecord& graph) {
  return rayleigh_quotient(build_laplacian(graph, LaplacianMode::kRegular), graph.features);
}

namespace {

struct ClassValues {
  std::vector<double> normal;
  std::vector<double> anomalous;
};

void append_rq(const GraphRecord& graph, std::vector<double>& out) {
  const Vector rq = raw_rq_vector(graph);
  out.insert(out.end(), rq.data(), rq.data() + rq.size());
}

std::vector<double> pooled_rq(const std::vector<GraphRecord>& graphs) {
  std::vector<double> values;
  for (const auto& g : graphs) append_rq(g, values);
  return values;
}

// Equal-width edges on [lo, hi]; one unit-width bin around lo when degenerate.
std::vector<double> make_edges(double lo, double hi, int bins) {
  if (!(hi > lo)) return {lo - 0.5, lo + 0.5};
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  edges.back() = hi;
  return edges;
}

std::pair<double, double> value_range(const std::vector<double>& a, const std::vector<double>& b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto* values : {&a, &b}) {
    for (const double v : *values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

}  // namespace

std::vector<double> binned_frequencies(const std::vector<double>& values,
                                       const std::vector<double>& edges) {
  const std::size_t bins = edges.size() - 1;
  std::vector<double> counts(bins, 0.0);
  if (values.empty()) return counts;
  const double lo = edges.front();
  const double hi = edges.back();
  for (const double v : values) {
    auto b = static_cast<std::ptrdiff_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    b = std::clamp<std::ptrdiff_t>(b, 0, static_cast<std::ptrdiff_t>(bins) - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& c : counts) c /= static_cast<double>(values.size());
  return counts;
}

RQHistogram rq_histogram(const std::vector<GraphRecord>& graphs, int bins) {
  if (graphs.empty()) throw ContractError("rq_histogram needs at least one graph");
  if (bins < 1) throw ConfigError("bin count must be positive");
  ClassValues values;
  RQHistogram out;
  for (const auto& g : graphs) {
    if (g.label == kAnomalous) {
      append_rq(g, values.anomalous);
      ++out.anomalous_samples;
    } else {
      append_rq(g, values.normal);
      ++out.normal_samples;
    }
  }
  const auto [lo, hi] = value_range(values.normal, values.anomalous);
  out.bin_edges = make_edges(lo, hi, bins);
  out.freq_normal = binned_frequencies(values.normal, out.bin_edges);
  out.freq_anomalous = binned_frequencies(values.anomalous, out.bin_edges);
  out.normal_values = values.normal.size();
  out.anomalous_values = values.anomalous.size();
  return out;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ShapeError("total_variation: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += std::abs(p[i] - q[i]);
  return 0.5 * sum;
}

nlohmann::json to_json(const RQHistogram& histogram) {
  return {
      {"bin_edges", histogram.bin_edges},
      {"freq_normal", histogram.freq_normal},
      {"freq_anomalous", histogram.freq_anomalous},
      {"counts",
       {{"normal_graphs", histogram.normal_samples},
        {"anomalous_graphs", histogram.anomalous_samples},
        {"normal_values", histogram.normal_values},
        {"anomalous_values", histogram.anomalous_values}}},
  };
}

namespace {

std::vector<std::vector<GraphRecord>> random_parts(const std::vector<GraphRecord>& graphs,
                                                   int parts, Rng& rng) {
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<GraphRecord>> out(static_cast<std::size_t>(parts));
  for (std::size_t k = 0; k < order.size(); ++k) {
    out[k % static_cast<std::size_t>(parts)].push_back(graphs[order[k]]);
  }
  return out;
}

// Mean |a(b) - c(b)| over the listed histogram pairs, per bin.
std::vector<double> mean_abs_difference(
    const std::vector<std::pair<const std::vector<double>*, const std::vector<double>*>>& pairs,
    std::size_t bins) {
  std::vector<double> out(bins, 0.0);
  for (const auto& [a, c] : pairs) {
    for (std::size_t b = 0; b < bins; ++b) out[b] += std::abs((*a)[b] - (*c)[b]);
  }
  for (auto& v : out) v /= static_cast<double>(pairs.size());
  return out;
}

std::vector<std::optional<double>> safe_ratio(const std::vector<double>& num,
                                              const std::vector<double>& den) {
  std::vector<std::optional<double>> out(num.size());
  for (std::size_t b = 0; b < num.size(); ++b) {
    if (den[b] != 0.0) out[b] = num[b] / den[b];
  }
  return out;
}

nlohmann::json optional_array(const std::vector<std::optional<double>>& values) {
  auto out = nlohmann::json::array();
  for (const auto& v : values) out.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return out;
}

}  // namespace

DistanceRatios distance_ratios(const std::vector<GraphRecord>& anomalous,
                               const std::vector<GraphRecord>& normal, int subsamples,
                               std::uint64_t seed, int bins) {
  if (subsamples < 2) throw ConfigError("distance ratios need at least 2 subsamples");
  if (anomalous.size() < static_cast<std::size_t>(subsamples) ||
      normal.size() < static_cast<std::size_t>(subsamples)) {
    throw ConfigError("each class needs at least as many graphs as subsamples");
  }
  Rng root(seed);
  Rng rng_a = root.split(1);
  Rng rng_n = root.split(0);
  const auto parts_a = random_parts(anomalous, subsamples, rng_a);
  const auto parts_n = random_parts(normal, subsamples, rng_n);

  const auto [lo, hi] = value_range(pooled_rq(anomalous), pooled_rq(normal));
  DistanceRatios out;
  out.bin_edges = make_edges(lo, hi, bins);
  const std::size_t nbins = out.bin_edges.size() - 1;

  std::vector<std::vector<double>> hist_a, hist_n;
  for (const auto& p : parts_a) hist_a.push_back(binned_frequencies(pooled_rq(p), out.bin_edges));
  for (const auto& p : parts_n) hist_n.push_back(binned_frequencies(pooled_rq(p), out.bin_edges));

  using Pair = std::pair<const std::vector<double>*, const std::vector<double>*>;
  std::vector<Pair> cross, within_a, within_n;
  for (const auto& ha : hist_a) {
    for (const auto& hn : hist_n) cross.emplace_back(&ha, &hn);
  }
  for (std::size_t i = 0; i < hist_a.size(); ++i) {
    for (std::size_t j = i + 1; j < hist_a.size(); ++j) within_a.emplace_back(&hist_a[i], &hist_a[j]);
  }
  for (std::size_t i = 0; i < hist_n.size(); ++i) {
    for (std::size_t j = i + 1; j < hist_n.size(); ++j) within_n.emplace_back(&hist_n[i], &hist_n[j]);
  }
  out.inter = mean_abs_difference(cross, nbins);
  out.intra_anomalous = mean_abs_difference(within_a, nbins);
  out.intra_normal = mean_abs_difference(within_n, nbins);
  out.inter_over_anomalous = safe_ratio(out.inter, out.intra_anomalous);
  out.inter_over_normal = safe_ratio(out.inter, out.intra_normal);
  return out;
}

nlohmann::json to_json(const DistanceRatios& ratios) {
  return {
      {"bin_edges", ratios.bin_edges},
      {"inter", ratios.inter},
      {"intra_anomalous", ratios.intra_anomalous},
      {"intra_normal", ratios.intra_normal},
      {"inter_over_anomalous", optional_array(ratios.inter_over_anomalous)},
      {"inter_over_normal", optional_array(ratios.inter_over_normal)},
  };
}

PerturbationReport verify_perturbation_bounds(const SparseSymMatrix& laplacian, const Vector& x,
                                              const Matrix& delta_matrix,
                                              const Vector& delta_signal) {
  const int n = laplacian.dim();
  if (x.size() != n || delta_signal.size() != n || delta_matrix.rows() != n ||
      delta_matrix.cols() != n) {
    throw ShapeError("perturbation inputs must match the Laplacian dimension");
  }
  if (n > 0 && (delta_matrix - delta_matrix.transpose()).cwiseAbs().maxCoeff() > 0.0) {
    throw ContractError("matrix perturbation must be symmetric");
  }
  if (x.squaredNorm() == 0.0) throw DegenerateSignalError("perturbation check of the zero signal");

  PerturbationReport report;
  const Matrix dense = laplacian.to_dense();
  const double xx = x.squaredNorm();
  const double rq = x.dot(dense * x) / xx;
  const double rq_perturbed = x.dot((dense + delta_matrix) * x) / xx;
  report.rq_change = std::abs(rq_perturbed - rq);
  report.delta_norm = spectral_norm_sym(delta_matrix);
  report.matrix_bound_holds = report.rq_change <= report.delta_norm + 1e-10;

  const Vector lx = dense * x;
  const Vector shifted = x + delta_signal;
  report.quadratic_change = shifted.dot(dense * shifted) - x.dot(lx);
  report.linear_term = 2.0 * lx.dot(delta_signal);
  report.second_order_term = delta_signal.dot(dense * delta_signal);
  report.identity_residual =
      std::abs(report.quadratic_change - report.linear_term - report.second_order_term);
  return report;
}

}  // namespace rqgnn
