#include "relparcel/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relparcel/errors.hpp"
#include "relparcel/ops.hpp"
#include "relparcel/rng.hpp"

namespace relparcel {

namespace {

constexpr double kProbFloor = 1e-12;

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i) - 1))]);
  }
}

}  // namespace

Tensor bce_loss(const Tensor& probs, const MultiHotLabel& target) {
  if (probs.numel() != target.size()) {
    throw DimensionError("bce_loss: " + std::to_string(probs.numel()) + " probabilities for " +
                         std::to_string(target.size()) + " labels");
  }
  const std::size_t n = target.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::clamp(probs[i], kProbFloor, 1.0 - kProbFloor);
    loss -= target[i] ? std::log(p) : std::log(1.0 - p);
  }
  loss /= static_cast<double>(n);
  return make_result({1}, {loss}, {probs}, [target, n](detail::Node& self) {
    auto& g = self.inputs[0]->ensure_grad();
    const auto& p_raw = self.inputs[0]->data;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = std::clamp(p_raw[i], kProbFloor, 1.0 - kProbFloor);
      const double d = target[i] ? -1.0 / p : 1.0 / (1.0 - p);
      g[i] += self.grad[0] * d / static_cast<double>(n);
    }
  });
}

void nadam_step(std::vector<Tensor>& params, OptimizerState& state) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), 0.0);
      state.second_moment.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("optimizer tracks " + std::to_string(state.first_moment.size()) + " tensors, got " +
                         std::to_string(params.size()));
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double b1 = state.beta1, b2 = state.beta2;
  const double m_corr_next = 1.0 - std::pow(b1, t + 1.0);
  const double g_corr = 1.0 - std::pow(b1, t);
  const double v_corr = 1.0 - std::pow(b2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    if (m.size() != params[k].numel()) {
      throw DimensionError("optimizer moment size mismatch for parameter " + std::to_string(k));
    }
    const std::vector<double> g = params[k].grad();
    auto theta = params[k].mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = b1 * m[i] / m_corr_next + (1.0 - b1) * g[i] / g_corr;
      const double v_hat = v[i] / v_corr;
      theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (patience == 0) throw ConfigError("train.patience must be positive");
  if (!(decay_factor >= 1.0)) throw ConfigError("train.decay_factor must be >= 1");
  if (decay_patience == 0) throw ConfigError("train.decay_patience must be positive");
  if (!(min_lr >= 0.0 && min_lr <= lr)) throw ConfigError("train.min_lr must be in [0, lr]");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("train.val_fraction must be in (0,1)");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("train.threshold must be in [0,1]");
}

std::string to_string(ScheduleDecision d) {
  switch (d) {
    case ScheduleDecision::continue_training:
      return "continue";
    case ScheduleDecision::decay_lr:
      return "decay_lr";
    case ScheduleDecision::stop:
      return "stop";
  }
  return "?";
}

ScheduleDecision schedule_update(TrainState& state, double val_loss, const TrainConfig& config) {
  if (!std::isnan(state.last_val_loss) && val_loss > state.last_val_loss) {
    state.increase_streak = std::min(state.increase_streak + 1, config.patience);
  } else {
    state.increase_streak = 0;
  }
  state.last_val_loss = val_loss;

  ScheduleDecision decision = ScheduleDecision::continue_training;
  if (val_loss < state.best_val_loss) {
    state.best_val_loss = val_loss;
    state.plateau_epochs = 0;
  } else if (++state.plateau_epochs >= config.decay_patience) {
    state.plateau_epochs = 0;
    state.lr_decays += 1;
    decision = ScheduleDecision::decay_lr;
  }
  if (state.increase_streak >= config.patience) decision = ScheduleDecision::stop;
  return decision;
}

Split split_train_val(std::size_t n, double fraction, std::uint64_t seed) {
  if (n < 2) throw ContractError("split_train_val needs at least 2 samples");
  if (!(fraction > 0.0 && fraction < 1.0)) throw ContractError("split fraction must lie in (0,1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::substream(seed, "split.train_val");
  shuffle(idx, rng);
  auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  Split s;
  s.val.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::vector<std::vector<std::size_t>> k_fold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > n) {
    throw ContractError("k_fold_split needs 1 <= k <= n, got k=" + std::to_string(k) + ", n=" + std::to_string(n));
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng = Rng::substream(seed, "split.k_fold");
  shuffle(idx, rng);
  std::vector<std::vector<std::size_t>> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos), idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

MultiHotLabel binarize(std::span<const double> probs, double tau) {
  MultiHotLabel out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= tau ? 1 : 0;
  return out;
}

Evaluation evaluate(const Model& model, const Dataset& ds, double threshold) {
  if (ds.num_labels() != model.num_labels()) {
    throw DataError("dataset has " + std::to_string(ds.num_labels()) + " labels, model " +
                    std::to_string(model.num_labels()));
  }
  NoGradGuard no_grad;
  Evaluation ev;
  double loss = 0.0;
  for (const auto& item : ds.items) {
    const Tensor probs = model.forward(item.image).probabilities;
    loss += bce_loss(probs, item.labels).item();
    ev.probabilities.emplace_back(probs.data().begin(), probs.data().end());
    ev.predictions.push_back(binarize(probs.data(), threshold));
  }
  ev.mean_loss = loss / static_cast<double>(ds.size());
  ev.report = dataset_metrics(ev.predictions, ds.labels());
  return ev;
}

std::vector<Tensor> parameter_tensors(const Model& model) {
  std::vector<Tensor> out;
  for (auto& p : model.parameters()) out.push_back(p.tensor);
  return out;
}

double batch_loss(const Model& model, const Dataset& ds, const std::vector<std::size_t>& batch) {
  NoGradGuard no_grad;
  double total = 0.0;
  for (auto i : batch) total += bce_loss(model.forward(ds.items[i].image).probabilities, ds.items[i].labels).item();
  return total / static_cast<double>(batch.size());
}

double train_step(Model& model, const Dataset& ds, const std::vector<std::size_t>& batch, OptimizerState& opt) {
  if (batch.empty()) throw ContractError("train_step on an empty batch");
  std::vector<Tensor> params = parameter_tensors(model);
  for (auto& p : params) p.zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (auto i : batch) {
    const Tensor loss = bce_loss(model.forward(ds.items[i].image).probabilities, ds.items[i].labels);
    total += loss.item();
    backward(scale(loss, inv));
  }
  nadam_step(params, opt);
  return total * inv;
}

TrainResult train(const ModelConfig& model_config, const TrainConfig& config, const Dataset& dataset,
                  std::uint64_t seed, const EpochCallback& on_epoch) {
  config.validate();
  if (dataset.size() < 2) throw ContractError("train needs at least 2 examples");
  if (dataset.num_labels() != model_config.num_labels) {
    throw ConfigError("model expects " + std::to_string(model_config.num_labels) + " labels, dataset has " +
                      std::to_string(dataset.num_labels()));
  }
  TrainResult result{build_model(model_config, mix_seed(seed, "init")), {}, {}, {}, {}};
  result.state.seed = seed;
  result.optimizer.lr = config.lr;
  result.split = split_train_val(dataset.size(), config.val_fraction, seed);
  const Dataset val = dataset.subset(result.split.val);

  std::vector<std::size_t> order = result.split.train;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng rng = Rng::substream(seed, "train.shuffle", epoch);
    shuffle(order, rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      loss_sum += train_step(result.model, dataset, batch, result.optimizer) * static_cast<double>(batch.size());
    }
    const Evaluation ev = evaluate(result.model, val, config.threshold);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), ev.mean_loss, result.optimizer.lr,
                    ev.report.mean_f1};
    result.state.epoch = epoch;
    result.state.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    const ScheduleDecision d = schedule_update(result.state, ev.mean_loss, config);
    if (d == ScheduleDecision::stop) break;
    if (d == ScheduleDecision::decay_lr) {
      if (result.optimizer.lr <= config.min_lr) break;
      result.optimizer.lr = std::max(result.optimizer.lr / config.decay_factor, config.min_lr);
    }
  }
  result.final_train_report = evaluate(result.model, dataset, config.threshold).report;
  return result;
}

}  // namespace relparcel
