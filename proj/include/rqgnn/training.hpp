#pragma once

#include "rqgnn/dataset.hpp"
#include "rqgnn/error.hpp"
#include "rqgnn/model.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rqgnn {

/// eta(n) = (1 - beta^n) / (1 - beta), evaluated as -expm1(n log1p(beta - 1)) / (1 - beta)
/// so that beta close to 1 keeps full precision.
double expected_number(long long n, double beta);

struct LossConfig {
  double beta = 0.999;
  double gamma = 1.5;
  long long normal_count = 1;     // n_0, from the training split
  long long anomalous_count = 1;  // n_1

  void validate() const;
  /// (1 - beta) / (1 - beta^{n_y}) = 1 / eta(n_y).
  double class_weight(int label) const;
};

/// -(1-beta)/(1-beta^{n_y}) * (1 - p_y)^gamma * log p_y with p = softmax(logits).
double cb_focal_loss(double logit0, double logit1, int label, const LossConfig& cfg);

struct TrainConfig {
  double lr = 0.005;
  int batch_size = 512;
  int epochs = 200;
  int hidden = 64;
  int wavelets = 4;
  int order = 6;
  double dropout = 0.4;
  double beta = 0.999;
  double gamma = 1.5;
  std::uint64_t seed = 0;
  std::string kernel_id = kDefaultKernel;

  void validate() const;
  ModelConfig model_config(int feature_dim) const;
};

struct Metrics {
  std::optional<double> auc;  // undefined for single-class splits
  double macro_f1 = 0.0;
  double loss = 0.0;
  long long confusion[2][2] = {{0, 0}, {0, 0}};  // [true][predicted]
};

/// Mann-Whitney AUC of `scores` for positives (label 1) over negatives; ties count 1/2.
std::optional<double> auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

/// Unweighted mean of the two per-class F1 scores; a class with no true and no
/// predicted members contributes 0.
double macro_f1(const std::vector<int>& predicted, const std::vector<int>& labels);

/// Adam with beta1 = 0.9, beta2 = 0.999, eps = 1e-8 and bias correction.
class Adam {
 public:
  explicit Adam(double lr) : lr_(lr) {}

  /// One update of every named tensor. Raises NumericalError naming the first
  /// parameter whose gradient is not finite.
  void step(ModelParams& params, const std::map<std::string, Matrix>& grads);
  long long steps() const noexcept { return t_; }

 private:
  double lr_;
  long long t_ = 0;
  std::map<std::string, Matrix> m_, v_;
};

/// Mean class-balanced focal loss of a train-mode batch and its parameter gradients.
struct BatchGradient {
  double loss = 0.0;
  std::map<std::string, Matrix> grads;
  Matrix batch_mean, batch_var;
};

BatchGradient batch_gradient(const ModelParams& params, std::span<const PreparedGraph* const> batch,
                             WaveletBankCache& banks, const LossConfig& loss, Rng* dropout_rng,
                             Mode mode = Mode::kTrain);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_auc;
  double val_macro_f1 = 0.0;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainResult {
  ModelParams best;
  int best_epoch = 0;  // 0 = initialisation
  std::vector<EpochRecord> history;
};

/// Raised on a non-finite loss; carries the parameters of the last finished epoch.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, ModelParams last_good)
      : NumericalError(what), last_good_(std::move(last_good)) {}
  const ModelParams& last_good() const noexcept { return last_good_; }

 private:
  ModelParams last_good_;
};

/// Seeded training loop: shuffle, batches, mean loss, backward, Adam; keeps the
/// epoch with the best validation Macro-F1 (earlier epoch on ties).
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  WaveletBankCache& banks);

Metrics evaluate(const ModelParams& params, WaveletBankCache& banks, const Dataset& split,
                 const LossConfig* loss = nullptr);
Metrics evaluate(const ModelParams& params, WaveletBankCache& banks,
                 const std::vector<PreparedGraph>& split, const LossConfig* loss = nullptr);

nlohmann::json to_json(const Metrics& metrics);

/// Denominator floor of the gradient-check relative error.
inline constexpr double kGradientFloor = 1e-8;

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
  /// Coordinates whose +h or -h evaluation changed some ReLU sign; their
  /// central difference straddles a kink.
  std::size_t kink_crossings = 0;
};

/// Central differences on every trainable scalar of the mean loss over `batch`.
/// In train mode the dropout mask is held fixed through a reseeded stream; in
/// infer mode batch norm uses the running statistics and dropout is off.
GradientCheckResult gradient_check(const ModelParams& params, WaveletBankCache& banks,
                                   std::span<const PreparedGraph* const> batch,
                                   const LossConfig& loss, double h, Mode mode = Mode::kInfer,
                                   std::uint64_t dropout_seed = 0);

}  // namespace rqgnn
