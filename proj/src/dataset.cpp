#include "rqgnn/dataset.hpp"

#include "rqgnn/error.hpp"
#include "rqgnn/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace rqgnn {

namespace fs = std::filesystem;

void GraphRecord::validate() const {
  if (node_count < 1) throw ContractError("graph must have at least one node");
  if (features.rows() != node_count) {
    throw ContractError("feature rows (" + std::to_string(features.rows()) +
                        ") differ from node count (" + std::to_string(node_count) + ")");
  }
  if (label != kNormal && label != kAnomalous) throw ContractError("label must be 0 or 1");
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto [i, j] = edges[e];
    if (i < 0 || j < 0 || i >= node_count || j >= node_count) {
      throw ContractError("edge endpoint out of range");
    }
    if (i == j) throw ContractError("self-loop on node " + std::to_string(i));
    if (i > j) throw ContractError("edge not in canonical (min, max) orientation");
    if (e > 0 && !(edges[e - 1] < edges[e])) {
      throw ContractError("edge list not sorted or contains duplicates");
    }
  }
}

std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
  for (auto& [i, j] : edges) {
    if (i == j) throw ContractError("self-loop on node " + std::to_string(i));
    if (i > j) std::swap(i, j);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

Dataset::Dataset(std::vector<GraphRecord> records, int feature_dim,
                 std::vector<int> node_label_values)
    : records_(std::move(records)),
      feature_dim_(feature_dim),
      node_label_values_(std::move(node_label_values)) {
  if (feature_dim_ <= 0) throw ContractError("feature dimension must be positive");
  if (node_label_values_.empty()) {
    node_label_values_.resize(static_cast<std::size_t>(feature_dim_));
    std::iota(node_label_values_.begin(), node_label_values_.end(), 0);
  }
  if (node_label_values_.size() != static_cast<std::size_t>(feature_dim_)) {
    throw ContractError("node label vocabulary size differs from feature dimension");
  }
  for (const auto& record : records_) {
    record.validate();
    if (record.features.cols() != feature_dim_) {
      throw ContractError("record feature width differs from dataset feature dimension");
    }
    (record.label == kAnomalous ? anomalous_count_ : normal_count_) += 1;
  }
}

std::vector<GraphRecord> Dataset::of_class(int label) const {
  std::vector<GraphRecord> out;
  for (const auto& record : records_) {
    if (record.label == label) out.push_back(record);
  }
  return out;
}

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset file " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back({number, std::move(text)});
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

long long parse_integer(std::string_view token, const fs::path& file, std::size_t line) {
  token = trim(token);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  long long value = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (token.empty() || ec != std::errc{} || ptr != end) {
    throw ParseError(file.filename().string(), line,
                     "expected an integer, found '" + std::string(token) + "'");
  }
  return value;
}

// TUDataset files are named <name>_<suffix>.txt.
fs::path part(const fs::path& dir, const std::string& name, const char* suffix) {
  return dir / (name + "_" + suffix + ".txt");
}

}  // namespace

Dataset parse_tudataset(const fs::path& directory, const std::string& name) {
  const fs::path adjacency_path = part(directory, name, "A");
  const fs::path indicator_path = part(directory, name, "graph_indicator");
  const fs::path graph_label_path = part(directory, name, "graph_labels");
  const fs::path node_label_path = part(directory, name, "node_labels");
  for (const auto& p : {adjacency_path, indicator_path, graph_label_path, node_label_path}) {
    if (!fs::exists(p)) throw LoadError("missing dataset file " + p.string());
  }

  const auto graph_label_lines = read_lines(graph_label_path);
  std::vector<long long> raw_graph_labels;
  raw_graph_labels.reserve(graph_label_lines.size());
  for (const auto& line : graph_label_lines) {
    raw_graph_labels.push_back(parse_integer(line.text, graph_label_path, line.number));
  }
  const std::size_t graph_count = raw_graph_labels.size();
  if (graph_count == 0) throw ParseError(graph_label_path.filename().string(), 1, "no graphs");

  // node k (0-based, global) -> (graph index, local index)
  const auto indicator_lines = read_lines(indicator_path);
  std::vector<std::size_t> node_graph;
  std::vector<int> node_local;
  std::vector<int> nodes_per_graph(graph_count, 0);
  node_graph.reserve(indicator_lines.size());
  for (const auto& line : indicator_lines) {
    const long long id = parse_integer(line.text, indicator_path, line.number);
    if (id < 1 || static_cast<std::size_t>(id) > graph_count) {
      throw ParseError(indicator_path.filename().string(), line.number,
                       "graph id " + std::to_string(id) + " outside 1.." +
                           std::to_string(graph_count));
    }
    const auto g = static_cast<std::size_t>(id - 1);
    node_graph.push_back(g);
    node_local.push_back(nodes_per_graph[g]++);
  }
  const std::size_t total_nodes = node_graph.size();

  const auto node_label_lines = read_lines(node_label_path);
  if (node_label_lines.size() != total_nodes) {
    const std::size_t at = node_label_lines.empty() ? 1 : node_label_lines.back().number;
    throw ParseError(node_label_path.filename().string(), at,
                     "expected " + std::to_string(total_nodes) + " node labels, found " +
                         std::to_string(node_label_lines.size()));
  }
  std::vector<int> raw_node_labels;
  raw_node_labels.reserve(total_nodes);
  for (const auto& line : node_label_lines) {
    raw_node_labels.push_back(
        static_cast<int>(parse_integer(line.text, node_label_path, line.number)));
  }
  const std::set<int> distinct(raw_node_labels.begin(), raw_node_labels.end());
  std::vector<int> vocabulary(distinct.begin(), distinct.end());
  if (vocabulary.empty()) {
    throw ParseError(node_label_path.filename().string(), 1, "no node labels");
  }
  const int feature_dim = static_cast<int>(vocabulary.size());

  std::vector<std::vector<Edge>> graph_edges(graph_count);
  for (const auto& line : read_lines(adjacency_path)) {
    const auto comma = line.text.find(',');
    if (comma == std::string::npos) {
      throw ParseError(adjacency_path.filename().string(), line.number,
                       "expected 'i, j', found '" + line.text + "'");
    }
    const std::string_view text(line.text);
    const long long a = parse_integer(text.substr(0, comma), adjacency_path, line.number);
    const long long b = parse_integer(text.substr(comma + 1), adjacency_path, line.number);
    for (const long long v : {a, b}) {
      if (v < 1 || static_cast<std::size_t>(v) > total_nodes) {
        throw ParseError(adjacency_path.filename().string(), line.number,
                         "node " + std::to_string(v) + " outside 1.." +
                             std::to_string(total_nodes));
      }
    }
    const auto ga = node_graph[static_cast<std::size_t>(a - 1)];
    const auto gb = node_graph[static_cast<std::size_t>(b - 1)];
    if (ga != gb) {
      throw ParseError(adjacency_path.filename().string(), line.number,
                       "edge joins nodes of different graphs");
    }
    if (a == b) continue;  // self-loops carry no Laplacian information
    graph_edges[ga].emplace_back(node_local[static_cast<std::size_t>(a - 1)],
                                 node_local[static_cast<std::size_t>(b - 1)]);
  }

  // Minority class is anomalous; ties go to the larger raw label.
  std::map<long long, std::size_t> label_frequency;
  for (const auto l : raw_graph_labels) ++label_frequency[l];
  long long anomalous_raw = label_frequency.begin()->first;
  for (const auto& [raw, count] : label_frequency) {
    const auto best = label_frequency[anomalous_raw];
    if (count < best || (count == best && raw > anomalous_raw)) anomalous_raw = raw;
  }
  if (label_frequency.size() == 1) anomalous_raw = std::numeric_limits<long long>::min();

  std::vector<GraphRecord> records(graph_count);
  for (std::size_t g = 0; g < graph_count; ++g) {
    if (nodes_per_graph[g] == 0) {
      throw ParseError(graph_label_path.filename().string(), graph_label_lines[g].number,
                       "graph " + std::to_string(g + 1) + " has no nodes");
    }
    records[g].node_count = nodes_per_graph[g];
    records[g].features = Matrix::Zero(nodes_per_graph[g], feature_dim);
    records[g].label = raw_graph_labels[g] == anomalous_raw ? kAnomalous : kNormal;
    records[g].edges = canonical_edges(std::move(graph_edges[g]));
  }
  for (std::size_t k = 0; k < total_nodes; ++k) {
    const auto column = std::lower_bound(vocabulary.begin(), vocabulary.end(), raw_node_labels[k]) -
                        vocabulary.begin();
    records[node_graph[k]].features(node_local[k], column) = 1.0;
  }
  return Dataset(std::move(records), feature_dim, std::move(vocabulary));
}

void write_tudataset(const Dataset& dataset, const fs::path& directory, const std::string& name) {
  fs::create_directories(directory);
  std::ofstream adjacency(part(directory, name, "A"));
  std::ofstream indicator(part(directory, name, "graph_indicator"));
  std::ofstream graph_labels(part(directory, name, "graph_labels"));
  std::ofstream node_labels(part(directory, name, "node_labels"));
  if (!adjacency || !indicator || !graph_labels || !node_labels) {
    throw LoadError("cannot write dataset files under " + directory.string());
  }
  const auto& vocabulary = dataset.node_label_values();
  std::size_t offset = 1;
  std::size_t graph_id = 1;
  for (const auto& record : dataset.records()) {
    for (int v = 0; v < record.node_count; ++v) {
      indicator << graph_id << '\n';
      Eigen::Index column = 0;
      record.features.row(v).maxCoeff(&column);
      node_labels << vocabulary[static_cast<std::size_t>(column)] << '\n';
    }
    // Both directions, sorted by source node as in the reference corpora.
    std::vector<Edge> directed;
    directed.reserve(record.edges.size() * 2);
    for (const auto& [i, j] : record.edges) {
      directed.emplace_back(i, j);
      directed.emplace_back(j, i);
    }
    std::sort(directed.begin(), directed.end());
    for (const auto& [i, j] : directed) {
      adjacency << offset + static_cast<std::size_t>(i) << ", "
                << offset + static_cast<std::size_t>(j) << '\n';
    }
    graph_labels << record.label << '\n';
    offset += static_cast<std::size_t>(record.node_count);
    ++graph_id;
  }
}

namespace {

// Cut point n * ratio, robust to ratios like 0.7 that are not exact in binary.
std::size_t floor_share(std::size_t n, double ratio) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
}

}  // namespace

DatasetSplits stratified_split(const Dataset& dataset, const SplitSpec& spec) {
  for (const double r : {spec.train, spec.val, spec.test}) {
    if (!(r > 0.0 && r < 1.0)) throw SplitError("split ratios must lie in (0, 1)");
  }
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) {
    throw SplitError("split ratios must sum to 1");
  }
  std::vector<GraphRecord> train, val, test;
  Rng root(spec.seed);
  for (const int label : {kNormal, kAnomalous}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (dataset.records()[i].label == label) members.push_back(i);
    }
    if (members.size() < 3) {
      throw SplitError("class " + std::to_string(label) + " has " +
                       std::to_string(members.size()) + " members; at least 3 required");
    }
    Rng rng = root.split(static_cast<std::uint64_t>(label));
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t n_train = floor_share(members.size(), spec.train);
    const std::size_t n_val = floor_share(members.size(), spec.val);
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& target = k < n_train ? train : (k < n_train + n_val ? val : test);
      target.push_back(dataset.records()[members[k]]);
    }
  }
  const int f = dataset.feature_dim();
  const auto& vocab = dataset.node_label_values();
  return {Dataset(std::move(train), f, vocab), Dataset(std::move(val), f, vocab),
          Dataset(std::move(test), f, vocab)};
}

Dataset perturb_dataset(const Dataset& dataset, double sample_fraction, double flip_prob,
                        std::uint64_t seed) {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) {
    throw ConfigError("flip probability must lie in [0, 1]");
  }
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0)) {
    throw ConfigError("sample fraction must lie in (0, 1]");
  }
  std::vector<GraphRecord> normals = dataset.of_class(kNormal);
  const auto n_selected = static_cast<std::size_t>(
      std::ceil(sample_fraction * static_cast<double>(normals.size()) - 1e-9));

  Rng root(seed);
  Rng pick = root.split(0);
  std::vector<std::size_t> order(normals.size());
  std::iota(order.begin(), order.end(), 0);
  pick.shuffle(std::span<std::size_t>(order));
  std::vector<char> selected(normals.size(), 0);
  for (std::size_t k = 0; k < n_selected; ++k) selected[order[k]] = 1;

  Rng flips = root.split(1);
  for (std::size_t g = 0; g < normals.size(); ++g) {
    if (!selected[g]) continue;
    auto& record = normals[g];
    const std::set<Edge> present(record.edges.begin(), record.edges.end());
    std::vector<Edge> out;
    for (int i = 0; i < record.node_count; ++i) {
      for (int j = i + 1; j < record.node_count; ++j) {
        const bool has = present.count({i, j}) > 0;
        const bool flip = flips.bernoulli(flip_prob);
        if (has != flip) out.emplace_back(i, j);
      }
    }
    record.edges = std::move(out);
    record.label = kAnomalous;
  }
  return Dataset(std::move(normals), dataset.feature_dim(), dataset.node_label_values());
}

Dataset generate_er_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.graph_count < 1 || spec.node_count < 1) {
    throw ConfigError("synthetic corpus needs at least one graph and one node");
  }
  if (!(spec.edge_prob >= 0.0 && spec.edge_prob <= 1.0)) {
    throw ConfigError("edge probability must lie in [0, 1]");
  }
  if (spec.label_weights.empty()) throw ConfigError("label weights must be non-empty");
  std::vector<double> cumulative(spec.label_weights.size());
  std::partial_sum(spec.label_weights.begin(), spec.label_weights.end(), cumulative.begin());
  const double total = cumulative.back();
  if (!(total > 0.0)) throw ConfigError("label weights must have positive sum");

  const int feature_dim = static_cast<int>(spec.label_weights.size());
  Rng rng(spec.seed);
  std::vector<GraphRecord> records(static_cast<std::size_t>(spec.graph_count));
  for (auto& record : records) {
    record.node_count = spec.node_count;
    record.features = Matrix::Zero(spec.node_count, feature_dim);
    for (int v = 0; v < spec.node_count; ++v) {
      const double u = rng.uniform() * total;
      const auto column = std::min<std::ptrdiff_t>(
          std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin(),
          feature_dim - 1);
      record.features(v, column) = 1.0;
    }
    for (int i = 0; i < spec.node_count; ++i) {
      for (int j = i + 1; j < spec.node_count; ++j) {
        if (rng.bernoulli(spec.edge_prob)) record.edges.emplace_back(i, j);
      }
    }
    record.label = kNormal;
  }
  return Dataset(std::move(records), feature_dim);
}

}  // namespace rqgnn
