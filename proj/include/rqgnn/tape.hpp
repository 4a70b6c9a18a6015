#pragma once

#include "rqgnn/dataset.hpp"

#include <functional>
#include <vector>

namespace rqgnn {

/// Handle to a value recorded on a GradientTape.
struct Var {
  int id = -1;
  bool valid() const noexcept { return id >= 0; }
};

/// Reverse-accumulation tape over dense matrices.
///
/// Operations are appended in evaluation order, so the node index is already a
/// topological order; backward() walks it in reverse. Each node keeps its
/// forward value and a closure that scatters its adjoint into its inputs.
class GradientTape {
 public:
  using Backprop = std::function<void(GradientTape&, int self)>;

  /// Constant input; never receives an adjoint.
  Var constant(Matrix value);
  /// Differentiable leaf.
  Var parameter(Matrix value);
  /// Records an arbitrary differentiable operation.
  Var record(Matrix value, std::vector<Var> inputs, Backprop backprop);

  const Matrix& value(Var v) const;
  /// Adjoint of v; zero-filled on first access.
  Matrix& grad(Var v);
  bool has_grad(Var v) const;
  bool requires_grad(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  /// Sign pattern (input > 0) of every ReLU recorded so far, in order.
  std::vector<bool> relu_pattern() const;

  /// Seeds the 1x1 root with `adjoint` and propagates to every reachable node.
  void backward(Var root, double adjoint = 1.0);

  // Core operations.
  Var matmul(Var a, Var b);
  /// x + 1 * bias, bias being 1 x cols(x).
  Var add_row(Var x, Var bias);
  Var relu(Var x);
  Var hadamard(Var a, Var b);
  Var sum(Var x);
  Var concat_cols(Var left, Var right);
  /// Stacks 1 x k rows into a B x k matrix.
  Var stack_rows(const std::vector<Var>& rows);
  /// Elementwise product with a fixed mask (inverted dropout).
  Var mask(Var x, Matrix mask);
  /// Per-column batch normalisation with batch statistics.
  Var batch_norm_train(Var z, Var gamma, Var beta, double eps, Matrix* batch_mean = nullptr,
                       Matrix* batch_var = nullptr);
  /// Per-column affine normalisation with fixed statistics.
  Var batch_norm_infer(Var z, Var gamma, Var beta, const Matrix& mean, const Matrix& var,
                       double eps);
  /// Mean over rows of the class-balanced focal loss; `weights` holds the
  /// per-row class weight (1-beta)/(1-beta^{n_y}).
  Var cb_focal_loss_mean(Var logits, const std::vector<int>& labels,
                         const std::vector<double>& weights, double gamma);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool grad_ready = false;
    std::vector<int> inputs;
    Backprop backprop;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  std::vector<int> relu_inputs_;
};

/// Per-sample class-balanced focal loss and its derivative with respect to the two
/// logits. log p_y is clamped at -50.
struct FocalLossTerms {
  double loss;
  double dlogit[2];
};
FocalLossTerms focal_loss_terms(double logit0, double logit1, int label, double weight,
                                double gamma);

}  // namespace rqgnn
