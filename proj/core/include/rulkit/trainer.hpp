#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "rulkit/data.hpp"
#include "rulkit/model.hpp"

namespace rulkit {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// L2 weight on attention-layer kernels and biases.
  double regularizer_weight = 1e-4;
  bool shuffle = true;
  /// Fraction of windows held out for per-epoch validation loss; 0 disables.
  double holdout_fraction = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0.0;
  double wall_time_s = 0.0;  // cumulative since training start
  std::optional<double> val_loss;
};

using TrainHistory = std::vector<EpochStats>;

/// Bias-corrected adaptive-moment gradient descent. State (first and second
/// moments, step counter) is keyed by parameter position, so call step()
/// with the same parameter list every time.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                         double epsilon = 1e-8);

  /// Applies one update from each parameter's current gradient. Parameters
  /// without gradients are treated as zero-gradient (left unchanged).
  void step(std::span<Tensor> params);

  std::size_t steps_taken() const { return t_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Runs the training loop: seeded shuffling, mini-batches, forward, loss =
/// MSE + attention Frobenius penalties + L2 on attention parameters,
/// backward, adaptive-moment update, gradients zeroed after every step.
/// Returns one entry per epoch with the sample-weighted mean training loss.
/// Aborts with a numeric error naming the first non-finite tensor if the
/// loss or a parameter stops being finite.
TrainHistory train(Model& model, const WindowBatch& data, const TrainConfig& config);

/// Columns: epoch, loss[, val_loss][, wall_time_s]. Timing is opt-in so the
/// default artifact stays byte-identical across reruns of the same seed.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path,
                       bool with_timing = false);

}  // namespace rulkit
