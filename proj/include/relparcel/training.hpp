#ifndef RELPARCEL_TRAINING_HPP
#define RELPARCEL_TRAINING_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "relparcel/data.hpp"
#include "relparcel/metrics.hpp"
#include "relparcel/model.hpp"
#include "relparcel/tensor.hpp"

namespace relparcel {

/// Mean over labels of -[y ln p + (1-y) ln(1-p)], p clamped to [1e-12, 1-1e-12].
Tensor bce_loss(const Tensor& probs, const MultiHotLabel& target);

/// Adam with Nesterov momentum.
struct OptimizerState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One update of every parameter from its accumulated gradient:
///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2
///   m_hat = b1 m / (1 - b1^(t+1)) + (1-b1) g / (1 - b1^t)
///   v_hat = v / (1 - b2^t)
///   theta -= lr m_hat / (sqrt(v_hat) + eps)
void nadam_step(std::vector<Tensor>& params, OptimizerState& state);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 8;
  std::size_t max_epochs = 200;
  std::size_t patience = 5;         // consecutive val-loss increases before stopping
  double decay_factor = 10.0;
  double min_lr = 1e-6;             // decay floor; a decay requested at the floor ends training
  std::size_t decay_patience = 1;   // non-improving epochs before each lr decay
  double val_fraction = 0.1;
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class ScheduleDecision { continue_training, decay_lr, stop };

std::string to_string(ScheduleDecision d);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
  double val_mean_f1 = 0.0;
};

struct TrainState {
  std::size_t epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double last_val_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t increase_streak = 0;  // in [0, patience]
  std::size_t plateau_epochs = 0;
  std::size_t lr_decays = 0;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
};

/// Plateau decay and early stopping from the validation-loss sequence only.
/// stop: val loss rose strictly for `patience` consecutive epochs.
/// decay_lr: val loss failed to beat the best for `decay_patience` epochs.
ScheduleDecision schedule_update(TrainState& state, double val_loss, const TrainConfig& config);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

/// Random disjoint split with |val| = round(fraction * n).
Split split_train_val(std::size_t n, double fraction, std::uint64_t seed);

/// k folds partitioning [0, n); sizes differ by at most one, larger folds first.
std::vector<std::vector<std::size_t>> k_fold_split(std::size_t n, std::size_t k, std::uint64_t seed);

/// Positive iff prob >= tau.
MultiHotLabel binarize(std::span<const double> probs, double tau);

struct Evaluation {
  std::vector<std::vector<double>> probabilities;
  std::vector<MultiHotLabel> predictions;
  MetricsReport report;
  double mean_loss = 0.0;
};

Evaluation evaluate(const Model& model, const Dataset& ds, double threshold);

struct TrainResult {
  Model model;
  TrainState state;
  OptimizerState optimizer;
  Split split;
  /// Metrics of the final model on the whole dataset passed to train().
  MetricsReport final_train_report;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// End-to-end training with Nadam, plateau decay and early stopping.
/// Init, split and shuffles all derive from `seed`.
TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Dataset& dataset,
                  std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Loss on a batch and one optimizer step; returns the pre-step batch loss.
double train_step(Model& model, const Dataset& ds, const std::vector<std::size_t>& batch, OptimizerState& opt);

/// Mean BCE of `model` over the listed examples.
double batch_loss(const Model& model, const Dataset& ds, const std::vector<std::size_t>& batch);

std::vector<Tensor> parameter_tensors(const Model& model);

}  // namespace relparcel

#endif  // RELPARCEL_TRAINING_HPP
