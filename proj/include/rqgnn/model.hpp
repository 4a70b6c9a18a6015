#pragma once

#include "rqgnn/dataset.hpp"
#include "rqgnn/linalg.hpp"
#include "rqgnn/rng.hpp"
#include "rqgnn/tape.hpp"
#include "rqgnn/wavelet.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rqgnn {

struct ModelConfig {
  int feature_dim = 1;  // F
  int hidden = 64;      // d
  int wavelets = 4;     // q
  int order = 6;        // K
  double dropout = 0.4;
  std::string kernel_id = kDefaultKernel;

  int embedding_dim() const noexcept { return wavelets * hidden + hidden; }
};

/// Fully connected layer y = x W + b with W stored in_dim x out_dim.
struct DenseLayer {
  Matrix weight;
  Matrix bias;  // 1 x out_dim
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

struct ModelParams {
  ModelConfig config;
  DenseLayer feat1, feat2;  // F -> d -> d
  DenseLayer rq1, rq2;      // d -> d -> d
  DenseLayer head1, head2;  // (qd + d) -> d -> 2
  Matrix bn_gamma, bn_beta;              // 1 x (qd + d), trainable
  Matrix running_mean, running_var;      // 1 x (qd + d), statistics

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases; bn gamma 1, beta 0,
  /// running mean 0, running variance 1.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  /// Visits trainable tensors in a fixed order with stable names.
  void for_each_trainable(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each_trainable(const std::function<void(const std::string&, const Matrix&)>& fn) const;
  std::size_t trainable_size() const;
  void validate() const;
};

/// Per-graph quantities that do not depend on the parameters.
struct PreparedGraph {
  const GraphRecord* record = nullptr;
  SparseSymMatrix laplacian;             // regular, used by the RQ branch
  SparseSymMatrix normalized_laplacian;  // used by the wavelet branch
  double domain = 2.0;                   // Chebyshev domain [0, domain]
};

PreparedGraph prepare_graph(const GraphRecord& record);
std::vector<PreparedGraph> prepare_graphs(const Dataset& dataset);

enum class Mode { kTrain, kInfer };

/// Intermediates of one graph, for inspection and gradient computation.
struct GraphTrace {
  Var x_tilde;     // n x d
  Var rq;          // 1 x d
  Var h_rq;        // 1 x d
  Var wavelet;     // n x qd
  Var h_att;       // 1 x qd
  Vector attention;  // a_j per node
};

struct ForwardTrace {
  std::vector<GraphTrace> graphs;
  Var embedding;   // B x (qd + d), before batch norm
  Var normalized;  // after batch norm (and dropout in train mode)
  Var logits;      // B x 2
  Matrix batch_mean, batch_var;
};

/// Tape handles of the trainable tensors, keyed like for_each_trainable.
struct ParamVars {
  std::vector<std::pair<std::string, Var>> entries;
  Var get(const std::string& name) const;
};

ParamVars load_params(GradientTape& tape, const ModelParams& params, bool trainable = true);

/// Column-wise RQ of X (n x d) under L, recorded on the tape (1 x d).
Var rq_op(GradientTape& tape, const SparseSymMatrix& laplacian, Var x);
/// Wavelet bank features [f_1(L) X | ... | f_q(L) X], recorded on the tape.
Var wavelet_op(GradientTape& tape, const SparseSymMatrix& laplacian, Var x, const WaveletBank& bank);
/// Pre-activation RQ pooling sum_j a_j h_j with a_j = <tile(rq, q), h_j>.
Var rq_pool_op(GradientTape& tape, Var wavelet, Var rq, int wavelets, Vector* attention = nullptr);

/// Two-layer MLP with ReLU after the first layer.
Var mlp2(GradientTape& tape, Var x, Var w1, Var b1, Var w2, Var b2);

/// RQL branch: returns h_RQ (1 x d); writes X~ and the RQ vector into `trace`.
Var rql_forward(GradientTape& tape, const PreparedGraph& graph, const ParamVars& vars,
                GraphTrace& trace);

/// CWGNN branch with RQ pooling: h_Att = ReLU(sum_j a_j h_j) (1 x qd).
Var cwgnn_rq_forward(GradientTape& tape, const PreparedGraph& graph, const WaveletBank& bank,
                     GraphTrace& trace);

/// Full forward of a batch. Train mode uses batch statistics and dropout drawn
/// from `dropout_rng`; infer mode uses the running statistics in `params`.
ForwardTrace model_forward(GradientTape& tape, const ParamVars& vars, const ModelParams& params,
                           std::span<const PreparedGraph* const> batch, WaveletBankCache& banks,
                           Mode mode, Rng* dropout_rng = nullptr);

/// Folds batch statistics into the running estimates (momentum 0.9).
void update_running_stats(ModelParams& params, const Matrix& batch_mean, const Matrix& batch_var);

/// Inference-mode logits for each graph (B x 2).
Matrix predict_logits(const ModelParams& params, std::span<const PreparedGraph* const> graphs,
                      WaveletBankCache& banks);

}  // namespace rqgnn
