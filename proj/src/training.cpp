#include "rqgnn/training.hpp"

#include "rqgnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rqgnn {

double expected_number(long long n, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
  if (n < 1) throw ConfigError("expected number needs n >= 1");
  if (n == 1 || beta == 0.0) return 1.0;
  return -std::expm1(static_cast<double>(n) * std::log1p(beta - 1.0)) / (1.0 - beta);
}

void LossConfig::validate() const {
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (normal_count < 1 || anomalous_count < 1) throw ConfigError("class counts must be >= 1");
}

double LossConfig::class_weight(int label) const {
  return 1.0 / expected_number(label == kAnomalous ? anomalous_count : normal_count, beta);
}

double cb_focal_loss(double logit0, double logit1, int label, const LossConfig& cfg) {
  return focal_loss_terms(logit0, logit1, label, cfg.class_weight(label), cfg.gamma).loss;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (epochs < 0) throw ConfigError("epoch count must be non-negative");
  if (hidden < 1 || wavelets < 1 || order < 1) throw ConfigError("d, q and K must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(beta >= 0.0 && beta < 1.0)) throw ConfigError("beta must lie in [0, 1)");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  kernel_by_id(kernel_id);
}

ModelConfig TrainConfig::model_config(int feature_dim) const {
  ModelConfig m;
  m.feature_dim = feature_dim;
  m.hidden = hidden;
  m.wavelets = wavelets;
  m.order = order;
  m.dropout = dropout;
  m.kernel_id = kernel_id;
  return m;
}

std::optional<double> auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double average_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == kAnomalous) {
        positive_rank_sum += average_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const auto n1 = static_cast<double>(positives);
  const auto n0 = static_cast<double>(negatives);
  return (positive_rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

double macro_f1(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size()) throw ShapeError("macro_f1: length mismatch");
  double total = 0.0;
  for (const int c : {kNormal, kAnomalous}) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const bool pred = predicted[i] == c;
      const bool truth = labels[i] == c;
      tp += pred && truth;
      fp += pred && !truth;
      fn += !pred && truth;
    }
    const std::size_t denom = 2 * tp + fp + fn;
    total += denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return total / 2.0;
}

void Adam::step(ModelParams& params, const std::map<std::string, Matrix>& grads) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  params.for_each_trainable([&](const std::string& name, Matrix&) {
    const auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("missing gradient for '" + name + "'");
    if (!it->second.allFinite()) {
      throw NumericalError("non-finite gradient for parameter '" + name + "'");
    }
  });
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  params.for_each_trainable([&](const std::string& name, Matrix& value) {
    const Matrix& g = grads.at(name);
    auto [mit, m_new] = m_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()));
    auto [vit, v_new] = v_.try_emplace(name, Matrix::Zero(value.rows(), value.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseAbs2();
    value.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
  });
}

namespace {

struct BatchLabels {
  std::vector<int> labels;
  std::vector<double> weights;
};

BatchLabels batch_labels(std::span<const PreparedGraph* const> batch, const LossConfig& loss) {
  BatchLabels out;
  const double w[2] = {loss.class_weight(kNormal), loss.class_weight(kAnomalous)};
  for (const auto* g : batch) {
    out.labels.push_back(g->record->label);
    out.weights.push_back(w[g->record->label]);
  }
  return out;
}

double batch_loss(const ModelParams& params, std::span<const PreparedGraph* const> batch,
                  WaveletBankCache& banks, const LossConfig& loss, Rng* dropout_rng, Mode mode,
                  std::vector<bool>* relu_pattern = nullptr) {
  GradientTape tape;
  const ParamVars vars = load_params(tape, params, false);
  const auto trace = model_forward(tape, vars, params, batch, banks, mode, dropout_rng);
  const auto lw = batch_labels(batch, loss);
  const Var total = tape.cb_focal_loss_mean(trace.logits, lw.labels, lw.weights, loss.gamma);
  if (relu_pattern) *relu_pattern = tape.relu_pattern();
  return tape.value(total)(0, 0);
}

std::vector<const PreparedGraph*> pointers(const std::vector<PreparedGraph>& graphs) {
  std::vector<const PreparedGraph*> out;
  out.reserve(graphs.size());
  for (const auto& g : graphs) out.push_back(&g);
  return out;
}

}  // namespace

BatchGradient batch_gradient(const ModelParams& params, std::span<const PreparedGraph* const> batch,
                             WaveletBankCache& banks, const LossConfig& loss, Rng* dropout_rng,
                             Mode mode) {
  GradientTape tape;
  const ParamVars vars = load_params(tape, params);
  const auto trace = model_forward(tape, vars, params, batch, banks, mode, dropout_rng);
  const auto lw = batch_labels(batch, loss);
  const Var total = tape.cb_focal_loss_mean(trace.logits, lw.labels, lw.weights, loss.gamma);
  tape.backward(total);

  BatchGradient out;
  out.loss = tape.value(total)(0, 0);
  for (const auto& [name, var] : vars.entries) out.grads.emplace(name, tape.grad(var));
  out.batch_mean = trace.batch_mean;
  out.batch_var = trace.batch_var;
  return out;
}

nlohmann::json to_json(const EpochRecord& record) {
  return {{"epoch", record.epoch},
          {"train_loss", record.train_loss},
          {"val_auc", record.val_auc ? nlohmann::json(*record.val_auc) : nlohmann::json(nullptr)},
          {"val_macro_f1", record.val_macro_f1}};
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  WaveletBankCache& banks) {
  cfg.validate();
  if (train_set.size() == 0 || val_set.size() == 0) throw ContractError("empty training split");
  if (train_set.normal_count() == 0 || train_set.anomalous_count() == 0) {
    throw ContractError("training split must contain both classes");
  }
  if (banks.q() != cfg.wavelets || banks.K() != cfg.order || banks.kernel_id() != cfg.kernel_id) {
    throw ConfigError("wavelet bank does not match the training configuration");
  }
  const LossConfig loss{cfg.beta, cfg.gamma, static_cast<long long>(train_set.normal_count()),
                        static_cast<long long>(train_set.anomalous_count())};
  loss.validate();

  Rng root(cfg.seed);
  TrainResult result;
  ModelParams params =
      ModelParams::initialize(cfg.model_config(train_set.feature_dim()), root.split(1).next());
  result.best = params;
  if (cfg.epochs == 0) return result;

  const auto train_graphs = prepare_graphs(train_set);
  const auto val_graphs = prepare_graphs(val_set);
  auto order = pointers(train_graphs);
  Rng shuffle_rng = root.split(2);
  Rng dropout_rng = root.split(3);
  Adam adam(cfg.lr);
  double best_f1 = -1.0;
  ModelParams last_good = params;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<const PreparedGraph*>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                      order.size() - start);
      const std::span<const PreparedGraph* const> batch(order.data() + start, count);
      BatchGradient bg = batch_gradient(params, batch, banks, loss, &dropout_rng);
      if (!std::isfinite(bg.loss)) {
        throw DivergenceError("loss became non-finite in epoch " + std::to_string(epoch),
                              last_good);
      }
      adam.step(params, bg.grads);
      update_running_stats(params, bg.batch_mean, bg.batch_var);
      loss_sum += bg.loss * static_cast<double>(count);
    }
    last_good = params;

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(order.size());
    const Metrics val = evaluate(params, banks, val_graphs);
    record.val_auc = val.auc;
    record.val_macro_f1 = val.macro_f1;
    result.history.push_back(record);
    if (val.macro_f1 > best_f1) {
      best_f1 = val.macro_f1;
      result.best = params;
      result.best_epoch = epoch;
    }
  }
  return result;
}

Metrics evaluate(const ModelParams& params, WaveletBankCache& banks,
                 const std::vector<PreparedGraph>& split, const LossConfig* loss) {
  if (split.empty()) throw ContractError("cannot evaluate an empty split");
  const auto ptrs = pointers(split);
  const Matrix logits = predict_logits(params, ptrs, banks);
  std::vector<double> scores;
  std::vector<int> predicted, labels;
  Metrics m;
  double loss_sum = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double z0 = logits(i, 0);
    const double z1 = logits(i, 1);
    scores.push_back(1.0 / (1.0 + std::exp(z0 - z1)));
    predicted.push_back(z1 > z0 ? kAnomalous : kNormal);
    labels.push_back(split[static_cast<std::size_t>(i)].record->label);
    ++m.confusion[labels.back()][predicted.back()];
    if (loss) loss_sum += cb_focal_loss(z0, z1, labels.back(), *loss);
  }
  m.auc = auc_score(scores, labels);
  m.macro_f1 = macro_f1(predicted, labels);
  m.loss = loss ? loss_sum / static_cast<double>(split.size()) : 0.0;
  return m;
}

Metrics evaluate(const ModelParams& params, WaveletBankCache& banks, const Dataset& split,
                 const LossConfig* loss) {
  return evaluate(params, banks, prepare_graphs(split), loss);
}

nlohmann::json to_json(const Metrics& metrics) {
  return {{"auc", metrics.auc ? nlohmann::json(*metrics.auc) : nlohmann::json(nullptr)},
          {"macro_f1", metrics.macro_f1},
          {"loss", metrics.loss},
          {"confusion",
           {{metrics.confusion[0][0], metrics.confusion[0][1]},
            {metrics.confusion[1][0], metrics.confusion[1][1]}}}};
}

GradientCheckResult gradient_check(const ModelParams& params, WaveletBankCache& banks,
                                   std::span<const PreparedGraph* const> batch,
                                   const LossConfig& loss, double h, Mode mode,
                                   std::uint64_t dropout_seed) {
  Rng analytic_rng(dropout_seed);
  const BatchGradient analytic = batch_gradient(params, batch, banks, loss, &analytic_rng, mode);
  std::vector<bool> base_pattern, plus_pattern, minus_pattern;
  Rng base_rng(dropout_seed);
  batch_loss(params, batch, banks, loss, &base_rng, mode, &base_pattern);
  GradientCheckResult result;
  ModelParams probe = params;
  probe.for_each_trainable([&](const std::string& name, Matrix& value) {
    const Matrix& g = analytic.grads.at(name);
    for (Eigen::Index k = 0; k < value.size(); ++k) {
      const double original = value(k);
      value(k) = original + h;
      Rng plus_rng(dropout_seed);
      const double plus = batch_loss(probe, batch, banks, loss, &plus_rng, mode, &plus_pattern);
      value(k) = original - h;
      Rng minus_rng(dropout_seed);
      const double minus = batch_loss(probe, batch, banks, loss, &minus_rng, mode, &minus_pattern);
      value(k) = original;
      const double numeric = (plus - minus) / (2.0 * h);
      if (plus_pattern != base_pattern || minus_pattern != base_pattern) ++result.kink_crossings;
      const double error = std::abs(g(k) - numeric) /
                           std::max({std::abs(g(k)), std::abs(numeric), kGradientFloor});
      if (error > result.max_relative_error) {
        result.max_relative_error = error;
        result.worst_parameter = name + "[" + std::to_string(k) + "]";
      }
      ++result.checked;
    }
  });
  return result;
}

}  // namespace rqgnn
