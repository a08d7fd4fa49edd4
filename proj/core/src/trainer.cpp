#include "rulkit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rulkit/rng.hpp"

namespace rulkit {

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (learning_rate <= 0.0 && learning_rate != 0.0) {
    throw ConfigError("learning rate must be non-negative");
  }
}

void AdamOptimizer::step(std::span<Tensor> params) {
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i].assign(params[i].size(), 0.0);
      v_[i].assign(params[i].size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw DimensionError("optimizer state tracks " + std::to_string(m_.size()) +
                         " parameters, got " + std::to_string(params.size()));
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (m_[i].size() != p.size()) {
      throw DimensionError("optimizer state size " + std::to_string(m_[i].size()) +
                           " does not match parameter " + shape_to_string(p.shape()));
    }
    if (!p.has_grad()) continue;
    auto values = p.values();
    auto grads = p.grad();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grads[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double m_hat = m_[i][j] / bc1;
      const double v_hat = v_[i][j] / bc2;
      values[j] -= lr_ * m_hat / (std::sqrt(v_hat) + epsilon_);
    }
  }
}

namespace {

Tensor gather_batch(const WindowBatch& data, std::span<const std::size_t> indices) {
  const std::size_t steps = data.seq_len();
  const std::size_t signals = data.signals();
  auto values = data.windows.values();
  std::vector<double> out(indices.size() * steps * signals);
  for (std::size_t i = 0; i < indices.size(); ++i)
    std::copy(values.begin() + indices[i] * steps * signals,
              values.begin() + (indices[i] + 1) * steps * signals,
              out.begin() + i * steps * signals);
  return Tensor::from_data({indices.size(), steps, signals}, std::move(out));
}

Tensor gather_targets(const WindowBatch& data, std::span<const std::size_t> indices) {
  auto values = data.targets.values();
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = values[indices[i]];
  return Tensor::from_data({indices.size(), 1}, std::move(out));
}

void check_all_finite(std::span<Tensor> params) {
  for (const Tensor& p : params) {
    if (!p.all_finite()) {
      const std::string name = p.name().empty() ? shape_to_string(p.shape()) : p.name();
      throw NumericError("training aborted: parameter " + name + " became non-finite");
    }
  }
}

// MSE + attention Frobenius penalties (batch mean) + L2 on attention params
Tensor batch_loss(Model& model, const Tensor& windows, const Tensor& targets,
                  const TrainConfig& config) {
  auto result = model.forward(windows, true);
  Tensor loss = mean(square(sub(result.output, targets)));
  if (!result.attention_maps.empty()) {
    const double frobenius_weight = model.attention_regularizer_weight();
    Tensor penalty;
    for (const Tensor& weights : result.attention_maps) {
      Tensor term = attention_regularizer(weights, frobenius_weight);
      penalty = penalty.defined() ? add(penalty, term) : term;
    }
    loss = add(loss, scale(penalty, 1.0 / static_cast<double>(windows.shape()[0])));
  }
  auto attention_params = model.attention_parameters();
  if (!attention_params.empty() && config.regularizer_weight > 0.0) {
    Tensor l2;
    for (const Tensor& p : attention_params) {
      Tensor term = sum(square(p));
      l2 = l2.defined() ? add(l2, term) : term;
    }
    loss = add(loss, scale(l2, config.regularizer_weight));
  }
  return loss;
}

}  // namespace

TrainHistory train(Model& model, const WindowBatch& data, const TrainConfig& config) {
  if (data.count() == 0) throw ContractError("training data is empty");
  if (config.batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (config.learning_rate < 0.0) throw ConfigError("learning_rate must be non-negative");
  if (config.holdout_fraction < 0.0 || config.holdout_fraction >= 1.0) {
    throw ConfigError("holdout_fraction must be in [0, 1)");
  }

  std::vector<std::size_t> order(data.count());
  std::iota(order.begin(), order.end(), 0);

  std::size_t holdout = 0;
  if (config.holdout_fraction > 0.0) {
    Rng split_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    split_rng.shuffle(order);
    holdout = static_cast<std::size_t>(config.holdout_fraction *
                                       static_cast<double>(data.count()));
    holdout = std::min(holdout, data.count() - 2);
  }
  std::vector<std::size_t> val_indices(order.end() - holdout, order.end());
  order.resize(order.size() - holdout);
  if (order.size() < 2) throw ContractError("fewer than two training windows after holdout");

  auto params = model.parameters();
  AdamOptimizer optimizer(config.learning_rate);
  Rng shuffle_rng(config.seed);
  TrainHistory history;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    std::size_t sample_count = 0;
    std::size_t begin = 0;
    while (begin < order.size()) {
      std::size_t count = std::min(config.batch_size, order.size() - begin);
      // batch-norm needs >= 2 samples; fold a trailing singleton away
      if (count == 1) break;
      std::span<const std::size_t> indices(order.data() + begin, count);
      Tensor windows = gather_batch(data, indices);
      Tensor targets = gather_targets(data, indices);

      Tape tape;
      double loss_value = 0.0;
      {
        TapeScope scope(tape);
        Tensor loss = batch_loss(model, windows, targets, config);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) {
          throw NumericError("training aborted: loss became non-finite in epoch " +
                             std::to_string(epoch + 1));
        }
        tape.backward(loss);
      }
      optimizer.step(params);
      for (Tensor& p : params) p.zero_grad();
      check_all_finite(params);

      loss_sum += loss_value * static_cast<double>(count);
      sample_count += count;
      begin += count;
    }

    EpochStats stats;
    stats.epoch = epoch + 1;
    stats.loss = loss_sum / static_cast<double>(sample_count);
    if (!val_indices.empty()) {
      Tensor windows = gather_batch(data, val_indices);
      Tensor targets = gather_targets(data, val_indices);
      stats.val_loss = mean(square(sub(model.forward(windows, false).output, targets))).item();
    }
    stats.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.push_back(stats);
  }
  return history;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       bool with_timing) {
  std::string out = "epoch,loss";
  const bool with_val = !history.empty() && history.front().val_loss.has_value();
  if (with_val) out += ",val_loss";
  if (with_timing) out += ",wall_time_s";
  out += "\n";
  char buf[64];
  for (const EpochStats& stats : history) {
    out += std::to_string(stats.epoch);
    std::snprintf(buf, sizeof(buf), ",%.9g", stats.loss);
    out += buf;
    if (with_val) {
      std::snprintf(buf, sizeof(buf), ",%.9g", stats.val_loss.value_or(0.0));
      out += buf;
    }
    if (with_timing) {
      std::snprintf(buf, sizeof(buf), ",%.3f", stats.wall_time_s);
      out += buf;
    }
    out += "\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  file << out;
}

}  // namespace rulkit
