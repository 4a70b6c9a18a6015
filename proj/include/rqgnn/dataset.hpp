#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace rqgnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Edge = std::pair<int, int>;

enum : int { kNormal = 0, kAnomalous = 1 };

/// One attributed undirected graph. Edges are stored once with first < second.
struct GraphRecord {
  int node_count = 0;
  std::vector<Edge> edges;
  Matrix features;  // node_count x F
  int label = kNormal;

  /// Throws ContractError when an invariant is violated.
  void validate() const;
};

/// Canonicalise an edge list: orient each pair as (min, max), drop duplicates,
/// sort. Self-loops are rejected with ContractError.
std::vector<Edge> canonical_edges(std::vector<Edge> edges);

class Dataset {
 public:
  Dataset() = default;
  /// Validates every record and derives class counts.
  Dataset(std::vector<GraphRecord> records, int feature_dim,
          std::vector<int> node_label_values = {});

  const std::vector<GraphRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  int feature_dim() const noexcept { return feature_dim_; }
  std::size_t normal_count() const noexcept { return normal_count_; }
  std::size_t anomalous_count() const noexcept { return anomalous_count_; }
  /// Raw node-label value for each one-hot column (ascending).
  const std::vector<int>& node_label_values() const noexcept { return node_label_values_; }

  /// Records of one class, in dataset order.
  std::vector<GraphRecord> of_class(int label) const;

 private:
  std::vector<GraphRecord> records_;
  int feature_dim_ = 0;
  std::vector<int> node_label_values_;
  std::size_t normal_count_ = 0;
  std::size_t anomalous_count_ = 0;
};

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`, `<name>_graph_labels.txt`
/// and `<name>_node_labels.txt` from `directory`.
///
/// Node labels are one-hot encoded over the sorted set of distinct values.
/// The graph class with fewer members becomes label 1 (anomalous); on a tie the
/// numerically larger raw label wins.
Dataset parse_tudataset(const std::filesystem::path& directory, const std::string& name);

/// Writes the four TUDataset files. Node labels are written as the raw vocabulary
/// values, graph labels as 0/1.
void write_tudataset(const Dataset& dataset, const std::filesystem::path& directory,
                     const std::string& name);

struct SplitSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Per-class seeded shuffle, then floor(train), floor(val) and the remainder
/// to test. Requires every ratio in (0,1), ratios summing to 1 and at least
/// three members per class.
DatasetSplits stratified_split(const Dataset& dataset, const SplitSpec& spec);

/// Replaces ceil(sample_fraction * |normal|) randomly chosen normal graphs by
/// copies whose node pairs each flip adjacency with probability flip_prob.
/// Copies are labelled anomalous; anomalous inputs are dropped.
Dataset perturb_dataset(const Dataset& dataset, double sample_fraction, double flip_prob,
                        std::uint64_t seed);

/// Settings for an Erdos-Renyi corpus of normal graphs with categorical node labels.
struct SyntheticCorpusSpec {
  int graph_count = 1000;
  int node_count = 26;
  double edge_prob = 28.0 / 325.0;
  std::vector<double> label_weights{0.55, 0.2, 0.15, 0.1};
  std::uint64_t seed = 0;
};

Dataset generate_er_corpus(const SyntheticCorpusSpec& spec);

}  // namespace rqgnn
