#pragma once

#include "rqgnn/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <string>

namespace testing {

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rqgnn_unit_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline rqgnn::GraphRecord make_graph(int n, std::vector<rqgnn::Edge> edges, int label = 0,
                                     int feature_dim = 1) {
  rqgnn::GraphRecord g;
  g.node_count = n;
  g.edges = rqgnn::canonical_edges(std::move(edges));
  g.features = rqgnn::Matrix::Ones(n, feature_dim);
  g.label = label;
  return g;
}

inline rqgnn::GraphRecord path_graph(int n, int label = 0) {
  std::vector<rqgnn::Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  return make_graph(n, edges, label);
}

inline rqgnn::GraphRecord complete_graph(int n, int label = 0) {
  std::vector<rqgnn::Edge> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) edges.emplace_back(i, j);
  return make_graph(n, edges, label);
}

}  // namespace testing
