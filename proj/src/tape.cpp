#include "rqgnn/tape.hpp"

#include "rqgnn/error.hpp"

#include <algorithm>
#include <cmath>

namespace rqgnn {

Var GradientTape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var GradientTape::parameter(Matrix value) {
  Var v = constant(std::move(value));
  nodes_.back().requires_grad = true;
  return v;
}

Var GradientTape::record(Matrix value, std::vector<Var> inputs, Backprop backprop) {
  Node n;
  n.value = std::move(value);
  for (const Var in : inputs) {
    if (!in.valid() || in.id >= static_cast<int>(nodes_.size())) {
      throw ContractError("operation input is not on this tape");
    }
    n.inputs.push_back(in.id);
    n.requires_grad = n.requires_grad || nodes_[in.id].requires_grad;
  }
  if (n.requires_grad) n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

const GradientTape::Node& GradientTape::node(Var v) const {
  if (!v.valid() || v.id >= static_cast<int>(nodes_.size())) {
    throw ContractError("variable is not on this tape");
  }
  return nodes_[v.id];
}

GradientTape::Node& GradientTape::node(Var v) {
  return const_cast<Node&>(std::as_const(*this).node(v));
}

const Matrix& GradientTape::value(Var v) const { return node(v).value; }

Matrix& GradientTape::grad(Var v) {
  Node& n = node(v);
  if (!n.grad_ready) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad_ready = true;
  }
  return n.grad;
}

bool GradientTape::has_grad(Var v) const { return node(v).grad_ready; }
bool GradientTape::requires_grad(Var v) const { return node(v).requires_grad; }

void GradientTape::backward(Var root, double adjoint) {
  if (nodes_.empty() || !root.valid() || root.id >= static_cast<int>(nodes_.size())) {
    throw ContractError("backward called before any forward computation");
  }
  if (nodes_[root.id].value.size() != 1) throw ContractError("backward root must be a scalar");
  grad(root)(0, 0) += adjoint;
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.grad_ready || !n.backprop) continue;
    n.backprop(*this, id);
  }
}

namespace {

Var in(const std::vector<int>& inputs, std::size_t k) { return Var{inputs[k]}; }

}  // namespace

Var GradientTape::matmul(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.cols() != bv.rows()) throw ShapeError("matmul inner dimensions differ");
  return record(av * bv, {a, b}, [](GradientTape& t, int self) {
    const auto& ins = t.nodes_[self].inputs;
    const Matrix& g = t.nodes_[self].grad;
    const Var a = in(ins, 0), b = in(ins, 1);
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var GradientTape::add_row(Var x, Var bias) {
  const Matrix& xv = value(x);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != xv.cols()) throw ShapeError("bias must be 1 x cols");
  Matrix out = xv;
  out.rowwise() += bv.row(0);
  return record(std::move(out), {x, bias}, [](GradientTape& t, int self) {
    const auto& ins = t.nodes_[self].inputs;
    const Matrix& g = t.nodes_[self].grad;
    if (t.requires_grad(in(ins, 0))) t.grad(in(ins, 0)) += g;
    if (t.requires_grad(in(ins, 1))) t.grad(in(ins, 1)) += g.colwise().sum();
  });
}

std::vector<bool> GradientTape::relu_pattern() const {
  std::vector<bool> pattern;
  for (const int id : relu_inputs_) {
    const Matrix& v = nodes_[static_cast<std::size_t>(id)].value;
    for (Eigen::Index k = 0; k < v.size(); ++k) pattern.push_back(v(k) > 0.0);
  }
  return pattern;
}

Var GradientTape::relu(Var x) {
  node(x);
  relu_inputs_.push_back(x.id);
  return record(value(x).cwiseMax(0.0), {x}, [](GradientTape& t, int self) {
    const Var x = in(t.nodes_[self].inputs, 0);
    const Matrix& g = t.nodes_[self].grad;
    t.grad(x) += (t.value(x).array() > 0.0).select(g, 0.0).matrix();
  });
}

Var GradientTape::hadamard(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) throw ShapeError("hadamard shape mismatch");
  return record(av.cwiseProduct(bv), {a, b}, [](GradientTape& t, int self) {
    const auto& ins = t.nodes_[self].inputs;
    const Matrix& g = t.nodes_[self].grad;
    const Var a = in(ins, 0), b = in(ins, 1);
    if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

Var GradientTape::sum(Var x) {
  Matrix out(1, 1);
  out(0, 0) = value(x).sum();
  return record(std::move(out), {x}, [](GradientTape& t, int self) {
    const Var x = in(t.nodes_[self].inputs, 0);
    t.grad(x).array() += t.nodes_[self].grad(0, 0);
  });
}

Var GradientTape::concat_cols(Var left, Var right) {
  const Matrix& l = value(left);
  const Matrix& r = value(right);
  if (l.rows() != r.rows()) throw ShapeError("concat_cols row mismatch");
  Matrix out(l.rows(), l.cols() + r.cols());
  out << l, r;
  return record(std::move(out), {left, right}, [](GradientTape& t, int self) {
    const auto& ins = t.nodes_[self].inputs;
    const Matrix& g = t.nodes_[self].grad;
    const Var l = in(ins, 0), r = in(ins, 1);
    const Eigen::Index lc = t.value(l).cols();
    if (t.requires_grad(l)) t.grad(l) += g.leftCols(lc);
    if (t.requires_grad(r)) t.grad(r) += g.rightCols(g.cols() - lc);
  });
}

Var GradientTape::stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows needs at least one row");
  const Eigen::Index k = value(rows.front()).cols();
  Matrix out(static_cast<Eigen::Index>(rows.size()), k);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Matrix& v = value(rows[r]);
    if (v.rows() != 1 || v.cols() != k) throw ShapeError("stack_rows expects equal 1 x k rows");
    out.row(static_cast<Eigen::Index>(r)) = v.row(0);
  }
  return record(std::move(out), rows, [](GradientTape& t, int self) {
    const auto& ins = t.nodes_[self].inputs;
    for (std::size_t r = 0; r < ins.size(); ++r) {
      const Var v = in(ins, r);
      if (t.requires_grad(v)) t.grad(v) += t.nodes_[self].grad.row(static_cast<Eigen::Index>(r));
    }
  });
}

Var GradientTape::mask(Var x, Matrix mask) {
  const Matrix& xv = value(x);
  if (mask.rows() != xv.rows() || mask.cols() != xv.cols()) throw ShapeError("mask shape mismatch");
  Matrix out = xv.cwiseProduct(mask);
  return record(std::move(out), {x}, [mask = std::move(mask)](GradientTape& t, int self) {
    const Var x = in(t.nodes_[self].inputs, 0);
    t.grad(x) += t.nodes_[self].grad.cwiseProduct(mask);
  });
}

Var GradientTape::batch_norm_train(Var z, Var gamma, Var beta, double eps, Matrix* batch_mean,
                                   Matrix* batch_var) {
  const Matrix& zv = value(z);
  const Eigen::Index rows = zv.rows();
  if (rows < 1) throw ShapeError("batch norm needs at least one row");
  const Matrix mean = zv.colwise().mean();
  const Matrix centered = zv.rowwise() - mean.row(0);
  const Matrix var = centered.array().square().colwise().mean();
  const Matrix inv_std = (var.array() + eps).rsqrt();
  const Matrix xhat = centered.array().rowwise() * inv_std.row(0).array();
  Matrix out = xhat.array().rowwise() * value(gamma).row(0).array();
  out.rowwise() += value(beta).row(0);
  if (batch_mean) *batch_mean = mean;
  if (batch_var) *batch_var = var;
  return record(std::move(out), {z, gamma, beta},
                [xhat, inv_std](GradientTape& t, int self) {
                  const auto& ins = t.nodes_[self].inputs;
                  const Matrix& g = t.nodes_[self].grad;
                  const Var z = in(ins, 0), gamma = in(ins, 1), beta = in(ins, 2);
                  if (t.requires_grad(gamma)) t.grad(gamma) += g.cwiseProduct(xhat).colwise().sum();
                  if (t.requires_grad(beta)) t.grad(beta) += g.colwise().sum();
                  if (!t.requires_grad(z)) return;
                  const auto b = static_cast<double>(g.rows());
                  const Matrix gx = g.array().rowwise() * t.value(gamma).row(0).array();
                  const Matrix sum_gx = gx.colwise().sum();
                  const Matrix sum_gx_xhat = gx.cwiseProduct(xhat).colwise().sum();
                  Matrix dz = (b * gx).rowwise() - sum_gx.row(0);
                  dz -= (xhat.array().rowwise() * sum_gx_xhat.row(0).array()).matrix();
                  dz = dz.array().rowwise() * (inv_std.row(0).array() / b);
                  t.grad(z) += dz;
                });
}

Var GradientTape::batch_norm_infer(Var z, Var gamma, Var beta, const Matrix& mean,
                                   const Matrix& var, double eps) {
  const Matrix& zv = value(z);
  const Matrix inv_std = (var.array() + eps).rsqrt();
  const Matrix xhat = (zv.rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array();
  Matrix out = xhat.array().rowwise() * value(gamma).row(0).array();
  out.rowwise() += value(beta).row(0);
  return record(std::move(out), {z, gamma, beta}, [xhat, inv_std](GradientTape& t, int self) {
    const auto& ins = t.nodes_[self].inputs;
    const Matrix& g = t.nodes_[self].grad;
    const Var z = in(ins, 0), gamma = in(ins, 1), beta = in(ins, 2);
    if (t.requires_grad(gamma)) t.grad(gamma) += g.cwiseProduct(xhat).colwise().sum();
    if (t.requires_grad(beta)) t.grad(beta) += g.colwise().sum();
    if (t.requires_grad(z)) {
      t.grad(z) += (g.array().rowwise() * (t.value(gamma).row(0).array() * inv_std.row(0).array()))
                       .matrix();
    }
  });
}

FocalLossTerms focal_loss_terms(double logit0, double logit1, int label, double weight,
                                double gamma) {
  constexpr double kLogFloor = -50.0;
  const double zy = label == 1 ? logit1 : logit0;
  const double zo = label == 1 ? logit0 : logit1;
  // log p_y = -log(1 + exp(zo - zy)), and 1 - p_y = p_other, both computed stably.
  const double gap = zo - zy;
  const double raw_log_p = gap > 0.0 ? -(gap + std::log1p(std::exp(-gap))) : -std::log1p(std::exp(gap));
  const double p_other = gap > 0.0 ? 1.0 / (1.0 + std::exp(-gap)) : std::exp(gap) / (1.0 + std::exp(gap));
  const double p_y = 1.0 - p_other;
  const bool clamped = raw_log_p < kLogFloor;
  const double log_p = clamped ? kLogFloor : raw_log_p;

  FocalLossTerms out{};
  out.loss = -weight * std::pow(p_other, gamma) * log_p;
  if (clamped) return out;  // gradient through log vanishes in the clamped region
  // d loss / d log p_y, using d p_y / d log p_y = p_y.
  double focal_slope = 0.0;
  if (p_other > 0.0 && gamma != 0.0) focal_slope = gamma * std::pow(p_other, gamma - 1.0) * p_y * log_p;
  const double dloss_dlogp = -weight * (std::pow(p_other, gamma) - focal_slope);
  // d log p_y / d z_y = 1 - p_y, d log p_y / d z_o = -p_o.
  const double d_y = dloss_dlogp * p_other;
  const double d_o = -dloss_dlogp * p_other;
  out.dlogit[label == 1 ? 1 : 0] = d_y;
  out.dlogit[label == 1 ? 0 : 1] = d_o;
  return out;
}

Var GradientTape::cb_focal_loss_mean(Var logits, const std::vector<int>& labels,
                                     const std::vector<double>& weights, double gamma) {
  const Matrix& z = value(logits);
  if (z.cols() != 2 || z.rows() != static_cast<Eigen::Index>(labels.size()) ||
      labels.size() != weights.size()) {
    throw ShapeError("loss expects B x 2 logits with B labels and weights");
  }
  const auto b = static_cast<double>(z.rows());
  Matrix dz(z.rows(), 2);
  double total = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const auto terms = focal_loss_terms(z(r, 0), z(r, 1), labels[r], weights[r], gamma);
    total += terms.loss;
    dz(r, 0) = terms.dlogit[0] / b;
    dz(r, 1) = terms.dlogit[1] / b;
  }
  Matrix out(1, 1);
  out(0, 0) = total / b;
  return record(std::move(out), {logits}, [dz = std::move(dz)](GradientTape& t, int self) {
    const Var z = in(t.nodes_[self].inputs, 0);
    t.grad(z) += t.nodes_[self].grad(0, 0) * dz;
  });
}

}  // namespace rqgnn
