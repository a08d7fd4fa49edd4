#pragma once

#include <utility>
#include <vector>

#include "rulkit/ops.hpp"
#include "rulkit/rng.hpp"
#include "rulkit/tensor.hpp"

namespace rulkit {

enum class Activation { identity, sigmoid, tanh, relu, leaky_relu };

Tensor apply_activation(Activation activation, const Tensor& x);

/// Uniform Glorot (fan-based) initialization: U(-limit, limit) with
/// limit = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Fully connected layer: y = activation(x W + b).
struct DenseLayer {
  Tensor W;  // [in x out]
  Tensor b;  // [out]
  Activation activation = Activation::identity;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation activation, Rng& rng);

  std::size_t input_size() const { return W.shape()[0]; }
  std::size_t output_size() const { return W.shape()[1]; }

  Tensor forward(const Tensor& x) const;  // [batch x in] -> [batch x out]
  std::vector<Tensor> parameters() const { return {W, b}; }
};

enum class CellKind { srnn, gru, lstm };

/// One recurrent cell. Gate matrices are W (input to hidden, [in x H]) and
/// U (hidden to hidden, [H x H]) with one bias per gate. Gate activations
/// are sigmoid and candidate activations tanh; the plain SRNN activation is
/// configurable and defaults to tanh.
struct RecurrentCell {
  CellKind kind = CellKind::srnn;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::vector<Tensor> W;  // lstm: i,f,o,c  gru: z,r,h  srnn: x
  std::vector<Tensor> U;
  std::vector<Tensor> b;
  Tensor W_y, b_y;  // srnn output projection (y = act(h W_y + b_y))
  Activation srnn_activation = Activation::tanh;

  static RecurrentCell srnn(std::size_t input, std::size_t hidden, Rng& rng,
                            Activation activation = Activation::tanh);
  static RecurrentCell gru(std::size_t input, std::size_t hidden, Rng& rng);
  static RecurrentCell lstm(std::size_t input, std::size_t hidden, Rng& rng);

  /// x_t [batch x in], h_prev [batch x H] -> (h_t, y_t).
  std::pair<Tensor, Tensor> srnn_step(const Tensor& x_t, const Tensor& h_prev) const;
  /// x_t [batch x in], h_prev/c_prev [batch x H] -> (h_t, c_t).
  std::pair<Tensor, Tensor> lstm_step(const Tensor& x_t, const Tensor& h_prev,
                                      const Tensor& c_prev) const;
  Tensor gru_step(const Tensor& x_t, const Tensor& h_prev) const;

  std::vector<Tensor> parameters() const;
};

/// Runs fwd left to right and bwd right to left over one sequence and merges
/// the two hidden sequences through a linear layer:
/// y_t = [h_fwd_t ; h_bwd_t] W + b. merge.activation should be identity.
Tensor bilstm_forward(const RecurrentCell& fwd, const RecurrentCell& bwd,
                      const DenseLayer& merge, const Tensor& seq /* [T x in] */);

enum class Padding { none, same };

/// 1-D cross-correlation over [in_channels x L] sequences. Output channel k
/// is bias[k] plus the sum over input channels of the correlation of
/// kernels[k][i] with the input channel. Output length is
/// floor((L_padded - kernel_width) / stride) + 1.
struct Conv1DLayer {
  Tensor kernels;  // [out_channels x in_channels x kernel_width]
  Tensor bias;     // [out_channels]
  std::size_t stride = 1;
  Padding padding = Padding::none;

  Conv1DLayer() = default;
  Conv1DLayer(std::size_t in_channels, std::size_t out_channels,
              std::size_t kernel_width, std::size_t stride, Padding padding, Rng& rng);

  std::size_t in_channels() const { return kernels.shape()[1]; }
  std::size_t out_channels() const { return kernels.shape()[0]; }
  std::size_t kernel_width() const { return kernels.shape()[2]; }
  std::size_t output_length(std::size_t input_length) const;

  Tensor forward(const Tensor& seq) const;  // [in_ch x L] -> [out_ch x L_out]
  std::vector<Tensor> parameters() const { return {kernels, bias}; }
};

/// Batch normalization over the leading axis. Training mode normalizes by
/// batch statistics (biased variance) and folds them into the running
/// buffers; inference mode normalizes by the running buffers.
struct BatchNormLayer {
  Tensor gamma, beta;               // [features], trainable
  Tensor running_mean, running_var; // [features], buffers
  double momentum = 0.99;
  double epsilon = 1e-3;

  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t features);

  std::size_t features() const { return gamma.size(); }

  Tensor forward(const Tensor& x, bool training);  // [batch x features]
  std::vector<Tensor> parameters() const { return {gamma, beta}; }
};

}  // namespace rulkit
