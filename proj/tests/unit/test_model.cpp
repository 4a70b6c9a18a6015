#include "helpers.hpp"

#include "rqgnn/checkpoint.hpp"
#include "rqgnn/error.hpp"
#include "rqgnn/model.hpp"
#include "rqgnn/verification.hpp"

#include <doctest.h>

#include <numeric>

using namespace rqgnn;

namespace {

GraphRecord labelled_random_graph(int n, int f, Rng& rng) {
  GraphRecord g = random_graph(n, 0.4, rng);
  g.features = Matrix::Zero(n, f);
  for (int v = 0; v < n; ++v) g.features(v, static_cast<int>(rng.below(static_cast<std::uint64_t>(f)))) = 1.0;
  return g;
}

Matrix logits_of(const ModelParams& params, const std::vector<GraphRecord>& graphs) {
  std::vector<PreparedGraph> prepared;
  for (const auto& g : graphs) prepared.push_back(prepare_graph(g));
  std::vector<const PreparedGraph*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  WaveletBankCache banks(params.config.wavelets, params.config.order, params.config.kernel_id);
  return predict_logits(params, ptrs, banks);
}

}  // namespace

TEST_CASE("default shape contract") {
  ModelConfig cfg;
  cfg.feature_dim = 65;
  CHECK(cfg.embedding_dim() == 320);
  const ModelParams p = ModelParams::initialize(cfg, 1);
  CHECK(p.feat1.weight.rows() == 65);
  CHECK(p.feat1.weight.cols() == 64);
  CHECK(p.rq1.weight.rows() == 64);
  CHECK(p.head1.weight.rows() == 320);
  CHECK(p.head2.weight.cols() == 2);
  CHECK(p.bn_gamma.cols() == 320);
  CHECK_NOTHROW(p.validate());

  Rng rng(2);
  const GraphRecord g = labelled_random_graph(9, 65, rng);
  const PreparedGraph pg = prepare_graph(g);
  WaveletBankCache banks(4, 6);
  GradientTape tape;
  const ParamVars vars = load_params(tape, p, false);
  const PreparedGraph* batch[] = {&pg};
  const ForwardTrace trace = model_forward(tape, vars, p, batch, banks, Mode::kInfer);
  CHECK(tape.value(trace.embedding).cols() == 320);
  CHECK(tape.value(trace.graphs[0].wavelet).cols() == 256);
  CHECK(tape.value(trace.logits).rows() == 1);
  CHECK(tape.value(trace.logits).cols() == 2);
}

TEST_CASE("initialisation bounds and determinism") {
  ModelConfig cfg;
  cfg.feature_dim = 5;
  const ModelParams a = ModelParams::initialize(cfg, 9);
  const ModelParams b = ModelParams::initialize(cfg, 9);
  CHECK(a.feat1.weight == b.feat1.weight);
  CHECK(a.head1.weight.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(320.0));
  CHECK(a.feat1.bias.cwiseAbs().maxCoeff() <= 1.0 / std::sqrt(5.0));
  CHECK(a.running_var == Matrix::Ones(1, 320));
  CHECK(a.bn_beta == Matrix::Zero(1, 320));
  std::size_t count = 0;
  a.for_each_trainable([&](const std::string&, const Matrix& m) { count += static_cast<std::size_t>(m.size()); });
  CHECK(count == a.trainable_size());
}

TEST_CASE("permutation invariance of logits") {
  Rng rng(3);
  ModelConfig cfg;
  cfg.feature_dim = 4;
  const ModelParams p = ModelParams::initialize(cfg, 5);
  for (int trial = 0; trial < 5; ++trial) {
    const GraphRecord g = labelled_random_graph(10, 4, rng);
    std::vector<int> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int>(perm));
    GraphRecord h = g;
    std::vector<Edge> edges;
    for (const auto& [i, j] : g.edges) edges.emplace_back(perm[i], perm[j]);
    h.edges = canonical_edges(edges);
    for (int v = 0; v < 10; ++v) h.features.row(perm[v]) = g.features.row(v);
    const Matrix a = logits_of(p, {g});
    const Matrix b = logits_of(p, {h});
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("identical graphs in a train batch get identical logits") {
  Rng rng(4);
  const GraphRecord g = labelled_random_graph(8, 3, rng);
  const GraphRecord other = labelled_random_graph(8, 3, rng);
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.dropout = 0.0;
  const ModelParams p = ModelParams::initialize(cfg, 1);
  const PreparedGraph a = prepare_graph(g), b = prepare_graph(g), c = prepare_graph(other);
  const PreparedGraph* batch[] = {&a, &b, &c};
  WaveletBankCache banks(4, 6);
  GradientTape tape;
  const auto trace = model_forward(tape, load_params(tape, p, false), p, batch, banks, Mode::kTrain);
  const Matrix& logits = tape.value(trace.logits);
  CHECK(logits.row(0) == logits.row(1));
}

TEST_CASE("constant batch gives the batch-norm shift") {
  Rng rng(4);
  const GraphRecord g = labelled_random_graph(8, 3, rng);
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.dropout = 0.0;
  ModelParams p = ModelParams::initialize(cfg, 1);
  p.bn_beta.setConstant(0.25);
  const PreparedGraph a = prepare_graph(g), b = prepare_graph(g);
  const PreparedGraph* batch[] = {&a, &b};
  WaveletBankCache banks(4, 6);
  GradientTape tape;
  const auto trace = model_forward(tape, load_params(tape, p, false), p, batch, banks, Mode::kTrain);
  CHECK((tape.value(trace.normalized).array() - 0.25).abs().maxCoeff() == 0.0);
}

TEST_CASE("RQ branch examples") {
  GradientTape tape;
  const auto p2 = build_laplacian(testing::path_graph(2), LaplacianMode::kRegular);
  const Var x = tape.constant((Matrix(2, 3) << 1, 1, 2, -1, 1, -2).finished());
  const Matrix rq = tape.value(rq_op(tape, p2, x));
  CHECK(rq(0, 0) == doctest::Approx(2.0));
  CHECK(std::abs(rq(0, 1)) < 1e-15);
  CHECK(rq(0, 2) == doctest::Approx(2.0));

  const auto single = build_laplacian(testing::make_graph(1, {}), LaplacianMode::kRegular);
  CHECK(tape.value(rq_op(tape, single, tape.constant(Matrix::Constant(1, 4, 3.0)))).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(6);
  const auto l = build_laplacian(random_graph(9, 0.5, rng), LaplacianMode::kRegular);
  Matrix xs(9, 3);
  for (Eigen::Index i = 0; i < xs.size(); ++i) xs(i) = rng.normal();
  Matrix scaled = xs;
  scaled.col(0) *= 7.0;
  scaled.col(2) *= -0.5;
  const Matrix r1 = tape.value(rq_op(tape, l, tape.constant(xs)));
  const Matrix r2 = tape.value(rq_op(tape, l, tape.constant(scaled)));
  CHECK((r1 - r2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("RQ pooling examples") {
  Rng rng(7);
  Matrix h(5, 6);
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = rng.normal();
  const Matrix rq = (Matrix(1, 3) << 0.4, -1.2, 0.7).finished();
  GradientTape tape;
  const Var hv = tape.constant(h);
  Vector attention;
  const Matrix zero = tape.value(rq_pool_op(tape, hv, tape.constant(Matrix::Zero(1, 3)), 2, &attention));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  CHECK(attention.cwiseAbs().maxCoeff() == 0.0);

  const Matrix once = tape.value(rq_pool_op(tape, hv, tape.constant(rq), 2, &attention));
  const Vector a1 = attention;
  const Matrix twice = tape.value(rq_pool_op(tape, hv, tape.constant(2.0 * rq), 2, &attention));
  CHECK((attention - 2.0 * a1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((twice - 2.0 * once).cwiseAbs().maxCoeff() < 1e-12);
  // a_j = <[rq | rq], h_j>
  Matrix tiled(1, 6);
  tiled << rq, rq;
  for (int j = 0; j < 5; ++j) CHECK(a1(j) == doctest::Approx((tiled * h.row(j).transpose())(0, 0)));
}

TEST_CASE("edgeless single node through the wavelet branch") {
  ModelConfig cfg;
  cfg.feature_dim = 2;
  cfg.hidden = 3;
  const ModelParams p = ModelParams::initialize(cfg, 2);
  GraphRecord g = testing::make_graph(1, {});
  g.features = (Matrix(1, 2) << 1, 0).finished();
  const PreparedGraph pg = prepare_graph(g);
  WaveletBankCache banks(4, 6);
  GradientTape tape;
  GraphTrace trace;
  rql_forward(tape, pg, load_params(tape, p, false), trace);
  cwgnn_rq_forward(tape, pg, banks.get(pg.domain), trace);
  // RQ of a single node is 0, so every attention weight and h_Att vanish.
  CHECK(tape.value(trace.rq).cwiseAbs().maxCoeff() == 0.0);
  CHECK(tape.value(trace.h_att).cwiseAbs().maxCoeff() == 0.0);
  // Each wavelet of L = [1] multiplies X~ by g(scale).
  const Matrix& xt = tape.value(trace.x_tilde);
  const Matrix& w = tape.value(trace.wavelet);
  const WaveletBank& bank = banks.get(pg.domain);
  for (int i = 0; i < 4; ++i) {
    const double gain = kernel_by_id(kDefaultKernel)(bank.scales[i]);
    CHECK((w.middleCols(i * 3, 3) - gain * xt).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("inference is bit-stable") {
  Rng rng(8);
  std::vector<GraphRecord> graphs;
  for (int i = 0; i < 6; ++i) graphs.push_back(labelled_random_graph(5 + i, 3, rng));
  ModelConfig cfg;
  cfg.feature_dim = 3;
  const ModelParams p = ModelParams::initialize(cfg, 3);
  CHECK(logits_of(p, graphs) == logits_of(p, graphs));
}

TEST_CASE("running statistics update") {
  ModelConfig cfg;
  cfg.feature_dim = 1;
  cfg.hidden = 2;
  cfg.wavelets = 1;
  ModelParams p = ModelParams::initialize(cfg, 0);
  const Matrix mean = Matrix::Constant(1, 4, 2.0);
  const Matrix var = Matrix::Constant(1, 4, 3.0);
  update_running_stats(p, mean, var);
  CHECK(p.running_mean(0, 0) == doctest::Approx(0.2));
  CHECK(p.running_var(0, 0) == doctest::Approx(0.9 + 0.3));
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg;
  cfg.feature_dim = 3;
  cfg.hidden = 8;
  ModelParams p = ModelParams::initialize(cfg, 4);
  p.running_mean.setConstant(0.125);
  p.running_var.setConstant(1.0 / 3.0);
  const auto dir = testing::fresh_dir("checkpoint");
  save_checkpoint(p, dir / "c.json");
  const ModelParams back = load_checkpoint(dir / "c.json");
  CHECK(back.config.hidden == 8);
  CHECK(back.config.kernel_id == kDefaultKernel);
  CHECK(back.feat1.weight == p.feat1.weight);
  CHECK(back.head2.bias == p.head2.bias);
  CHECK(back.running_var == p.running_var);
  CHECK(back.bn_gamma == p.bn_gamma);

  const auto doc = checkpoint_to_json(p);
  CHECK(doc["version"] == 1);
  for (const char* key : {"F", "d", "q", "K", "kernel_id", "scales"}) CHECK(doc["config"].contains(key));
  CHECK(doc["params"]["mlp_feat.0.weight"]["shape"] == nlohmann::json::array({3, 8}));
  CHECK(doc["bn"].contains("running_mean"));

  Rng rng(9);
  const std::vector<GraphRecord> graphs{labelled_random_graph(7, 3, rng)};
  CHECK(logits_of(back, graphs) == logits_of(p, graphs));

  auto broken = doc;
  broken["params"]["head.0.weight"]["shape"] = nlohmann::json::array({1, 1});
  CHECK_THROWS(checkpoint_from_json(broken));
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), LoadError);
}
