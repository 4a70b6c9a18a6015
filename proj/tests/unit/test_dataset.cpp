#include "helpers.hpp"

#include "rqgnn/error.hpp"

#include <doctest.h>

using namespace rqgnn;
using testing::fresh_dir;
using testing::write_file;

namespace {

void write_corpus(const std::filesystem::path& dir, const std::string& name, const std::string& a,
                  const std::string& indicator, const std::string& graph_labels,
                  const std::string& node_labels) {
  write_file(dir / (name + "_A.txt"), a);
  write_file(dir / (name + "_graph_indicator.txt"), indicator);
  write_file(dir / (name + "_graph_labels.txt"), graph_labels);
  write_file(dir / (name + "_node_labels.txt"), node_labels);
}

Dataset labelled_corpus(int normal, int anomalous) {
  std::vector<GraphRecord> records;
  for (int i = 0; i < normal + anomalous; ++i) {
    records.push_back(testing::path_graph(3 + i % 4, i < normal ? kNormal : kAnomalous));
  }
  return Dataset(std::move(records), 1);
}

}  // namespace

TEST_CASE("two-graph corpus parses into one-hot features") {
  const auto dir = fresh_dir("two_graph");
  write_corpus(dir, "toy", "1, 2\n2, 1\n3, 4\n4, 3\n", "1\n1\n2\n2\n", "1\n-1\n", "0\n1\n0\n0\n");
  const Dataset ds = parse_tudataset(dir, "toy");
  REQUIRE(ds.size() == 2);
  CHECK(ds.feature_dim() == 2);
  const auto& g1 = ds.records()[0];
  CHECK(g1.node_count == 2);
  CHECK(g1.edges == std::vector<Edge>{{0, 1}});
  CHECK(g1.features == (Matrix(2, 2) << 1, 0, 0, 1).finished());
  CHECK(ds.records()[1].node_count == 2);
  // Tied class sizes: the larger raw label is the anomalous class.
  CHECK(g1.label == kAnomalous);
  CHECK(ds.records()[1].label == kNormal);
  CHECK(ds.node_label_values() == std::vector<int>{0, 1});
}

TEST_CASE("empty edge file gives an edgeless graph") {
  const auto dir = fresh_dir("edgeless");
  write_corpus(dir, "e", "", "1\n1\n1\n", "0\n", "2\n2\n5\n");
  const Dataset ds = parse_tudataset(dir, "e");
  REQUIRE(ds.size() == 1);
  CHECK(ds.records()[0].node_count == 3);
  CHECK(ds.records()[0].edges.empty());
  CHECK(ds.records()[0].label == kNormal);
}

TEST_CASE("out-of-range node in the adjacency file is a parse error at that line") {
  const auto dir = fresh_dir("bad_node");
  write_corpus(dir, "b", "1, 2\n2, 1\n4, 5\n", "1\n1\n2\n2\n", "0\n1\n", "0\n0\n0\n0\n");
  try {
    parse_tudataset(dir, "b");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
    CHECK(e.file() == "b_A.txt");
  }
}

TEST_CASE("missing files and malformed numbers are reported") {
  const auto dir = fresh_dir("missing");
  CHECK_THROWS_AS(parse_tudataset(dir, "none"), LoadError);
  write_corpus(dir, "m", "1, x\n", "1\n1\n", "0\n", "0\n0\n");
  CHECK_THROWS_AS(parse_tudataset(dir, "m"), ParseError);
}

TEST_CASE("self-loops in the adjacency file are dropped") {
  const auto dir = fresh_dir("self_loop");
  write_corpus(dir, "s", "1, 1\n1, 2\n2, 1\n", "1\n1\n", "0\n", "0\n0\n");
  const Dataset ds = parse_tudataset(dir, "s");
  CHECK(ds.records()[0].edges == std::vector<Edge>{{0, 1}});
}

TEST_CASE("write then parse reproduces the dataset") {
  SyntheticCorpusSpec spec;
  spec.graph_count = 40;
  spec.node_count = 9;
  spec.edge_prob = 0.3;
  spec.seed = 4;
  const Dataset original = perturb_dataset(generate_er_corpus(spec), 0.25, 0.3, 9);
  const auto dir = fresh_dir("round_trip");
  write_tudataset(original, dir, "rt");
  const Dataset back = parse_tudataset(dir, "rt");
  REQUIRE(back.size() == original.size());
  CHECK(back.feature_dim() == original.feature_dim());
  for (std::size_t i = 0; i < back.size(); ++i) {
    const auto& a = original.records()[i];
    const auto& b = back.records()[i];
    CHECK(a.node_count == b.node_count);
    CHECK(a.edges == b.edges);
    CHECK(a.features == b.features);
    CHECK(a.label == b.label);
  }
}

TEST_CASE("stratified split uses per-class floors") {
  const Dataset ds = labelled_corpus(90, 10);
  const DatasetSplits s = stratified_split(ds, SplitSpec{0.7, 0.15, 0.15, 3});
  CHECK(s.train.normal_count() == 63);
  CHECK(s.train.anomalous_count() == 7);
  CHECK(s.val.normal_count() == 13);
  CHECK(s.val.anomalous_count() == 1);
  CHECK(s.test.normal_count() == 14);
  CHECK(s.test.anomalous_count() == 2);
}

TEST_CASE("split preconditions and determinism") {
  const Dataset ds = labelled_corpus(30, 6);
  CHECK_THROWS_AS(stratified_split(ds, SplitSpec{1.0, 0.0, 0.0, 1}), SplitError);
  CHECK_THROWS_AS(stratified_split(ds, SplitSpec{0.5, 0.3, 0.3, 1}), SplitError);
  CHECK_THROWS_AS(stratified_split(labelled_corpus(30, 2), SplitSpec{}), SplitError);

  const auto a = stratified_split(ds, SplitSpec{0.7, 0.15, 0.15, 11});
  const auto b = stratified_split(ds, SplitSpec{0.7, 0.15, 0.15, 11});
  REQUIRE(a.train.size() == b.train.size());
  for (std::size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train.records()[i].node_count == b.train.records()[i].node_count);
    CHECK(a.train.records()[i].label == b.train.records()[i].label);
  }
  CHECK(a.train.size() + a.val.size() + a.test.size() == ds.size());
}

TEST_CASE("zero flip probability only relabels") {
  SyntheticCorpusSpec spec;
  spec.graph_count = 60;
  spec.node_count = 7;
  spec.edge_prob = 0.4;
  spec.seed = 2;
  const Dataset corpus = generate_er_corpus(spec);
  const Dataset out = perturb_dataset(corpus, 0.2, 0.0, 5);
  REQUIRE(out.size() == corpus.size());
  CHECK(out.anomalous_count() == 12);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out.records()[i].edges == corpus.records()[i].edges);
    CHECK(out.records()[i].features == corpus.records()[i].features);
  }
}

TEST_CASE("full flip of a single edge gives the complement") {
  GraphRecord p2 = testing::path_graph(2);
  const Dataset ds({p2}, 1);
  const Dataset out = perturb_dataset(ds, 1.0, 1.0, 0);
  REQUIRE(out.size() == 1);
  CHECK(out.records()[0].edges.empty());
  CHECK(out.records()[0].label == kAnomalous);
}

TEST_CASE("perturbing 5 percent of 1000 normal graphs") {
  SyntheticCorpusSpec spec;
  spec.seed = 8;
  const Dataset corpus = generate_er_corpus(spec);
  CHECK(corpus.size() == 1000);
  CHECK(corpus.anomalous_count() == 0);
  const Dataset out = perturb_dataset(corpus, 0.05, 0.15, 1);
  CHECK(out.anomalous_count() == 50);
  CHECK(out.normal_count() == 950);
}

TEST_CASE("synthetic corpus statistics") {
  SyntheticCorpusSpec spec;
  spec.seed = 21;
  const Dataset corpus = generate_er_corpus(spec);
  double edges = 0.0;
  for (const auto& g : corpus.records()) {
    CHECK(g.node_count == 26);
    edges += static_cast<double>(g.edges.size());
  }
  CHECK(edges / 1000.0 == doctest::Approx(28.0).epsilon(0.03));
  CHECK(corpus.feature_dim() == 4);
}

TEST_CASE("record validation") {
  GraphRecord g = testing::path_graph(3);
  CHECK_NOTHROW(g.validate());
  g.edges.push_back({1, 1});
  CHECK_THROWS_AS(g.validate(), ContractError);
  CHECK_THROWS_AS(canonical_edges({{2, 2}}), ContractError);
  CHECK(canonical_edges({{3, 1}, {1, 3}, {0, 2}}) == std::vector<Edge>{{0, 2}, {1, 3}});
}
