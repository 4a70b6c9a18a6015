#include "rqgnn/model.hpp"

#include "rqgnn/error.hpp"

#include <cmath>

namespace rqgnn {

namespace {

DenseLayer make_layer(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer{Matrix(in, out), Matrix(1, out)};
  for (Eigen::Index c = 0; c < out; ++c) {
    for (Eigen::Index r = 0; r < in; ++r) layer.weight(r, c) = rng.uniform(-bound, bound);
  }
  for (Eigen::Index c = 0; c < out; ++c) layer.bias(0, c) = rng.uniform(-bound, bound);
  return layer;
}

void check_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(name) + " has shape " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (!m.allFinite()) throw ContractError(std::string(name) + " contains non-finite values");
}

}  // namespace

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  if (config.feature_dim < 1 || config.hidden < 1 || config.wavelets < 1 || config.order < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1)");
  }
  Rng rng(seed);
  const int f = config.feature_dim;
  const int d = config.hidden;
  const int e = config.embedding_dim();
  ModelParams p;
  p.config = config;
  p.feat1 = make_layer(f, d, rng);
  p.feat2 = make_layer(d, d, rng);
  p.rq1 = make_layer(d, d, rng);
  p.rq2 = make_layer(d, d, rng);
  p.head1 = make_layer(e, d, rng);
  p.head2 = make_layer(d, 2, rng);
  p.bn_gamma = Matrix::Ones(1, e);
  p.bn_beta = Matrix::Zero(1, e);
  p.running_mean = Matrix::Zero(1, e);
  p.running_var = Matrix::Ones(1, e);
  return p;
}

void ModelParams::for_each_trainable(
    const std::function<void(const std::string&, Matrix&)>& fn) {
  const std::pair<const char*, DenseLayer*> layers[] = {
      {"mlp_feat.0", &feat1}, {"mlp_feat.1", &feat2}, {"mlp_rq.0", &rq1},
      {"mlp_rq.1", &rq2},     {"head.0", &head1},     {"head.1", &head2}};
  for (const auto& [name, layer] : layers) {
    fn(std::string(name) + ".weight", layer->weight);
    fn(std::string(name) + ".bias", layer->bias);
  }
  fn("bn.gamma", bn_gamma);
  fn("bn.beta", bn_beta);
}

void ModelParams::for_each_trainable(
    const std::function<void(const std::string&, const Matrix&)>& fn) const {
  const_cast<ModelParams*>(this)->for_each_trainable(
      [&](const std::string& name, Matrix& m) { fn(name, m); });
}

std::size_t ModelParams::trainable_size() const {
  std::size_t total = 0;
  for_each_trainable([&](const std::string&, const Matrix& m) { total += m.size(); });
  return total;
}

void ModelParams::validate() const {
  const int f = config.feature_dim;
  const int d = config.hidden;
  const int e = config.embedding_dim();
  check_shape(feat1.weight, f, d, "mlp_feat.0.weight");
  check_shape(feat1.bias, 1, d, "mlp_feat.0.bias");
  check_shape(feat2.weight, d, d, "mlp_feat.1.weight");
  check_shape(feat2.bias, 1, d, "mlp_feat.1.bias");
  check_shape(rq1.weight, d, d, "mlp_rq.0.weight");
  check_shape(rq1.bias, 1, d, "mlp_rq.0.bias");
  check_shape(rq2.weight, d, d, "mlp_rq.1.weight");
  check_shape(rq2.bias, 1, d, "mlp_rq.1.bias");
  check_shape(head1.weight, e, d, "head.0.weight");
  check_shape(head1.bias, 1, d, "head.0.bias");
  check_shape(head2.weight, d, 2, "head.1.weight");
  check_shape(head2.bias, 1, 2, "head.1.bias");
  check_shape(bn_gamma, 1, e, "bn.gamma");
  check_shape(bn_beta, 1, e, "bn.beta");
  check_shape(running_mean, 1, e, "bn.running_mean");
  check_shape(running_var, 1, e, "bn.running_var");
  if ((running_var.array() < 0.0).any()) throw ContractError("running variance is negative");
}

PreparedGraph prepare_graph(const GraphRecord& record) {
  PreparedGraph g;
  g.record = &record;
  g.laplacian = build_laplacian(record, LaplacianMode::kRegular);
  g.normalized_laplacian = build_laplacian(record, LaplacianMode::kNormalized);
  g.domain = filter_domain(lambda_max(g.normalized_laplacian, LaplacianMode::kNormalized));
  return g;
}

std::vector<PreparedGraph> prepare_graphs(const Dataset& dataset) {
  std::vector<PreparedGraph> out;
  out.reserve(dataset.size());
  for (const auto& record : dataset.records()) out.push_back(prepare_graph(record));
  return out;
}

Var ParamVars::get(const std::string& name) const {
  for (const auto& [key, var] : entries) {
    if (key == name) return var;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

ParamVars load_params(GradientTape& tape, const ModelParams& params, bool trainable) {
  ParamVars vars;
  params.for_each_trainable([&](const std::string& name, const Matrix& m) {
    vars.entries.emplace_back(name, trainable ? tape.parameter(m) : tape.constant(m));
  });
  return vars;
}

Var rq_op(GradientTape& tape, const SparseSymMatrix& laplacian, Var x) {
  const Matrix& xv = tape.value(x);
  if (xv.rows() != laplacian.dim()) throw ShapeError("rq_op: row mismatch");
  Matrix lx = laplacian.multiply(xv);
  const Eigen::Index d = xv.cols();
  Matrix num(1, d), den(1, d), out(1, d);
  for (Eigen::Index f = 0; f < d; ++f) {
    num(0, f) = xv.col(f).dot(lx.col(f));
    den(0, f) = xv.col(f).squaredNorm() + kRayleighEpsilon;
    out(0, f) = num(0, f) / den(0, f);
  }
  // d(u/v) = (u' v - u v') / v^2 with u' = 2 L x and v' = 2 x.
  return tape.record(std::move(out), {x},
                     [x, lx = std::move(lx), num, den](GradientTape& t, int self) {
                       const Matrix& g = t.grad(Var{self});
                       const Matrix& xv = t.value(x);
                       const Eigen::Index d = xv.cols();
                       Matrix& gx = t.grad(x);
                       for (Eigen::Index f = 0; f < d; ++f) {
                         const double inv = 1.0 / den(0, f);
                         const double a = 2.0 * g(0, f) * inv;
                         const double b = 2.0 * g(0, f) * num(0, f) * inv * inv;
                         gx.col(f).noalias() += a * lx.col(f) - b * xv.col(f);
                       }
                     });
}

Var wavelet_op(GradientTape& tape, const SparseSymMatrix& laplacian, Var x, const WaveletBank& bank) {
  Matrix out = wavelet_features(laplacian, tape.value(x), bank);
  // Each f_i(L) is symmetric, so its vector-Jacobian product is the same filter.
  return tape.record(std::move(out), {x}, [x, &laplacian, &bank](GradientTape& t, int self) {
    const Matrix& g = t.grad(Var{self});
    const Eigen::Index d = t.value(x).cols();
    Matrix& gx = t.grad(x);
    for (int i = 0; i < bank.q; ++i) {
      gx += apply_chebyshev_filter(laplacian, g.middleCols(i * d, d), bank.coefficients[i],
                                   bank.lambda_max);
    }
  });
}

Var rq_pool_op(GradientTape& tape, Var wavelet, Var rq, int wavelets, Vector* attention) {
  const Matrix& h = tape.value(wavelet);
  const Matrix& r = tape.value(rq);
  if (r.rows() != 1 || h.cols() != r.cols() * wavelets) {
    throw ShapeError("rq_pool: wavelet width must equal q * rq length");
  }
  const Matrix tiled = r.replicate(1, wavelets);        // 1 x qd
  Vector a = h * tiled.transpose();                      // n
  Matrix out = a.transpose() * h;                        // 1 x qd
  if (attention) *attention = a;
  return tape.record(std::move(out), {wavelet, rq},
                     [wavelet, rq, wavelets, tiled, a](GradientTape& t, int self) {
                       const Matrix& g = t.grad(Var{self});  // 1 x qd
                       const Matrix& h = t.value(wavelet);
                       const Vector hg = h * g.transpose();  // n
                       if (t.requires_grad(wavelet)) {
                         t.grad(wavelet).noalias() += a * g + hg * tiled;
                       }
                       if (t.requires_grad(rq)) {
                         const Matrix gt = hg.transpose() * h;  // 1 x qd
                         const Eigen::Index d = t.value(rq).cols();
                         Matrix& gr = t.grad(rq);
                         for (int i = 0; i < wavelets; ++i) gr += gt.middleCols(i * d, d);
                       }
                     });
}

Var mlp2(GradientTape& tape, Var x, Var w1, Var b1, Var w2, Var b2) {
  const Var hidden = tape.relu(tape.add_row(tape.matmul(x, w1), b1));
  return tape.add_row(tape.matmul(hidden, w2), b2);
}

Var rql_forward(GradientTape& tape, const PreparedGraph& graph, const ParamVars& vars,
                GraphTrace& trace) {
  const GraphRecord& record = *graph.record;
  if (record.features.cols() != tape.value(vars.get("mlp_feat.0.weight")).rows()) {
    throw ShapeError("graph feature width differs from the model's input dimension");
  }
  const Var x = tape.constant(record.features);
  trace.x_tilde = mlp2(tape, x, vars.get("mlp_feat.0.weight"), vars.get("mlp_feat.0.bias"),
                       vars.get("mlp_feat.1.weight"), vars.get("mlp_feat.1.bias"));
  trace.rq = rq_op(tape, graph.laplacian, trace.x_tilde);
  trace.h_rq = mlp2(tape, trace.rq, vars.get("mlp_rq.0.weight"), vars.get("mlp_rq.0.bias"),
                    vars.get("mlp_rq.1.weight"), vars.get("mlp_rq.1.bias"));
  return trace.h_rq;
}

Var cwgnn_rq_forward(GradientTape& tape, const PreparedGraph& graph, const WaveletBank& bank,
                     GraphTrace& trace) {
  if (!trace.x_tilde.valid() || !trace.rq.valid()) {
    throw ContractError("cwgnn_rq_forward needs X~ and the RQ vector from rql_forward");
  }
  trace.wavelet = wavelet_op(tape, graph.normalized_laplacian, trace.x_tilde, bank);
  const Var pooled = rq_pool_op(tape, trace.wavelet, trace.rq, bank.q, &trace.attention);
  trace.h_att = tape.relu(pooled);
  return trace.h_att;
}

ForwardTrace model_forward(GradientTape& tape, const ParamVars& vars, const ModelParams& params,
                           std::span<const PreparedGraph* const> batch, WaveletBankCache& banks,
                           Mode mode, Rng* dropout_rng) {
  if (batch.empty()) throw ContractError("model_forward needs a non-empty batch");
  if (banks.q() != params.config.wavelets || banks.K() != params.config.order) {
    throw ConfigError("wavelet bank does not match the model configuration");
  }
  ForwardTrace trace;
  std::vector<Var> rows;
  rows.reserve(batch.size());
  for (const PreparedGraph* graph : batch) {
    GraphTrace g;
    const Var h_rq = rql_forward(tape, *graph, vars, g);
    const Var h_att = cwgnn_rq_forward(tape, *graph, banks.get(graph->domain), g);
    rows.push_back(tape.concat_cols(h_att, h_rq));
    trace.graphs.push_back(std::move(g));
  }
  trace.embedding = tape.stack_rows(rows);
  const Var gamma = vars.get("bn.gamma");
  const Var beta = vars.get("bn.beta");
  if (mode == Mode::kTrain) {
    trace.normalized = tape.batch_norm_train(trace.embedding, gamma, beta, kBatchNormEps,
                                             &trace.batch_mean, &trace.batch_var);
    const double p = params.config.dropout;
    if (p > 0.0) {
      if (!dropout_rng) throw ContractError("train mode with dropout needs a random stream");
      const Matrix& z = tape.value(trace.normalized);
      Matrix mask(z.rows(), z.cols());
      const double keep_scale = 1.0 / (1.0 - p);
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (Eigen::Index c = 0; c < z.cols(); ++c) {
          mask(r, c) = dropout_rng->bernoulli(p) ? 0.0 : keep_scale;
        }
      }
      trace.normalized = tape.mask(trace.normalized, std::move(mask));
    }
  } else {
    trace.normalized = tape.batch_norm_infer(trace.embedding, gamma, beta, params.running_mean,
                                             params.running_var, kBatchNormEps);
  }
  trace.logits = mlp2(tape, trace.normalized, vars.get("head.0.weight"), vars.get("head.0.bias"),
                      vars.get("head.1.weight"), vars.get("head.1.bias"));
  return trace;
}

void update_running_stats(ModelParams& params, const Matrix& batch_mean, const Matrix& batch_var) {
  params.running_mean =
      kBatchNormMomentum * params.running_mean + (1.0 - kBatchNormMomentum) * batch_mean;
  params.running_var =
      kBatchNormMomentum * params.running_var + (1.0 - kBatchNormMomentum) * batch_var;
}

Matrix predict_logits(const ModelParams& params, std::span<const PreparedGraph* const> graphs,
                      WaveletBankCache& banks) {
  Matrix out(static_cast<Eigen::Index>(graphs.size()), 2);
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < graphs.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, graphs.size() - start);
    GradientTape tape;
    const ParamVars vars = load_params(tape, params, false);
    const auto trace =
        model_forward(tape, vars, params, graphs.subspan(start, count), banks, Mode::kInfer);
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) =
        tape.value(trace.logits);
  }
  return out;
}

}  // namespace rqgnn
