#include "rulkit/layers.hpp"

#include <cmath>

#include "op_support.hpp"

namespace rulkit {

Tensor apply_activation(Activation activation, const Tensor& x) {
  switch (activation) {
    case Activation::identity: return x;
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh_op(x);
    case Activation::relu: return relu(x);
    case Activation::leaky_relu: return leaky_relu(x);
  }
  throw ContractError("unknown activation");
}

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-limit, limit);
  return Tensor::from_data(std::move(shape), std::move(values), true);
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act, Rng& rng)
    : W(glorot_uniform({in, out}, in, out, rng)),
      b(Tensor::zeros({out}, true)),
      activation(act) {}

Tensor DenseLayer::forward(const Tensor& x) const {
  if (x.shape().size() != 2 || x.cols() != input_size()) {
    throw DimensionError("dense layer expects [batch x " + std::to_string(input_size()) +
                         "], got " + shape_to_string(x.shape()));
  }
  return apply_activation(activation, add(matmul(x, W), b));
}

namespace {

void init_gates(RecurrentCell& cell, std::size_t gates, Rng& rng) {
  const std::size_t in = cell.input_size, hidden = cell.hidden_size;
  for (std::size_t g = 0; g < gates; ++g)
    cell.W.push_back(glorot_uniform({in, hidden}, in, hidden, rng));
  for (std::size_t g = 0; g < gates; ++g)
    cell.U.push_back(glorot_uniform({hidden, hidden}, hidden, hidden, rng));
  for (std::size_t g = 0; g < gates; ++g)
    cell.b.push_back(Tensor::zeros({hidden}, true));
}

Tensor gate_preact(const Tensor& x, const Tensor& W, const Tensor& h, const Tensor& U,
                   const Tensor& b) {
  return add(add(matmul(x, W), matmul(h, U)), b);
}

void check_step_shapes(const RecurrentCell& cell, const Tensor& x_t, const Tensor& h_prev,
                       const char* op) {
  if (x_t.shape().size() != 2 || x_t.cols() != cell.input_size) {
    throw DimensionError(std::string(op) + ": input " + shape_to_string(x_t.shape()) +
                         " does not match input_size " + std::to_string(cell.input_size));
  }
  if (h_prev.shape().size() != 2 || h_prev.cols() != cell.hidden_size ||
      h_prev.rows() != x_t.rows()) {
    throw DimensionError(std::string(op) + ": state " + shape_to_string(h_prev.shape()) +
                         " does not match batch " + std::to_string(x_t.rows()) +
                         " and hidden_size " + std::to_string(cell.hidden_size));
  }
}

}  // namespace

RecurrentCell RecurrentCell::srnn(std::size_t input, std::size_t hidden, Rng& rng,
                                  Activation activation) {
  RecurrentCell cell;
  cell.kind = CellKind::srnn;
  cell.input_size = input;
  cell.hidden_size = hidden;
  cell.srnn_activation = activation;
  init_gates(cell, 1, rng);
  cell.W_y = glorot_uniform({hidden, hidden}, hidden, hidden, rng);
  cell.b_y = Tensor::zeros({hidden}, true);
  return cell;
}

RecurrentCell RecurrentCell::gru(std::size_t input, std::size_t hidden, Rng& rng) {
  RecurrentCell cell;
  cell.kind = CellKind::gru;
  cell.input_size = input;
  cell.hidden_size = hidden;
  init_gates(cell, 3, rng);  // z, r, h
  return cell;
}

RecurrentCell RecurrentCell::lstm(std::size_t input, std::size_t hidden, Rng& rng) {
  RecurrentCell cell;
  cell.kind = CellKind::lstm;
  cell.input_size = input;
  cell.hidden_size = hidden;
  init_gates(cell, 4, rng);  // i, f, o, c
  return cell;
}

std::pair<Tensor, Tensor> RecurrentCell::srnn_step(const Tensor& x_t,
                                                   const Tensor& h_prev) const {
  if (kind != CellKind::srnn) throw ContractError("srnn_step on a non-srnn cell");
  check_step_shapes(*this, x_t, h_prev, "srnn_step");
  Tensor h = apply_activation(srnn_activation, gate_preact(x_t, W[0], h_prev, U[0], b[0]));
  Tensor y = apply_activation(srnn_activation, add(matmul(h, W_y), b_y));
  return {h, y};
}

std::pair<Tensor, Tensor> RecurrentCell::lstm_step(const Tensor& x_t, const Tensor& h_prev,
                                                   const Tensor& c_prev) const {
  if (kind != CellKind::lstm) throw ContractError("lstm_step on a non-lstm cell");
  check_step_shapes(*this, x_t, h_prev, "lstm_step");
  check_step_shapes(*this, x_t, c_prev, "lstm_step");
  Tensor i = sigmoid(gate_preact(x_t, W[0], h_prev, U[0], b[0]));
  Tensor f = sigmoid(gate_preact(x_t, W[1], h_prev, U[1], b[1]));
  Tensor o = sigmoid(gate_preact(x_t, W[2], h_prev, U[2], b[2]));
  Tensor candidate = tanh_op(gate_preact(x_t, W[3], h_prev, U[3], b[3]));
  Tensor c = add(mul(f, c_prev), mul(i, candidate));
  Tensor h = mul(o, tanh_op(c));
  return {h, c};
}

Tensor RecurrentCell::gru_step(const Tensor& x_t, const Tensor& h_prev) const {
  if (kind != CellKind::gru) throw ContractError("gru_step on a non-gru cell");
  check_step_shapes(*this, x_t, h_prev, "gru_step");
  Tensor z = sigmoid(gate_preact(x_t, W[0], h_prev, U[0], b[0]));
  Tensor r = sigmoid(gate_preact(x_t, W[1], h_prev, U[1], b[1]));
  Tensor candidate = tanh_op(add(add(matmul(x_t, W[2]), matmul(mul(r, h_prev), U[2])), b[2]));
  // h = (1 - z) * h_prev + z * candidate
  Tensor one_minus_z = add_scalar(scale(z, -1.0), 1.0);
  return add(mul(one_minus_z, h_prev), mul(z, candidate));
}

std::vector<Tensor> RecurrentCell::parameters() const {
  std::vector<Tensor> params;
  for (const Tensor& t : W) params.push_back(t);
  for (const Tensor& t : U) params.push_back(t);
  for (const Tensor& t : b) params.push_back(t);
  if (kind == CellKind::srnn) {
    params.push_back(W_y);
    params.push_back(b_y);
  }
  return params;
}

Tensor bilstm_forward(const RecurrentCell& fwd, const RecurrentCell& bwd,
                      const DenseLayer& merge, const Tensor& seq) {
  if (fwd.kind != CellKind::lstm || bwd.kind != CellKind::lstm) {
    throw ContractError("bilstm_forward needs two lstm cells");
  }
  if (fwd.hidden_size != bwd.hidden_size) {
    throw DimensionError("bilstm cells disagree on hidden size: " +
                         std::to_string(fwd.hidden_size) + " vs " +
                         std::to_string(bwd.hidden_size));
  }
  const std::size_t steps = seq.rows();
  std::vector<Tensor> h_fwd(steps), h_bwd(steps);

  Tensor h = Tensor::zeros({1, fwd.hidden_size});
  Tensor c = Tensor::zeros({1, fwd.hidden_size});
  for (std::size_t t = 0; t < steps; ++t) {
    auto [nh, nc] = fwd.lstm_step(slice_rows(seq, t, 1), h, c);
    h = nh;
    c = nc;
    h_fwd[t] = h;
  }
  h = Tensor::zeros({1, bwd.hidden_size});
  c = Tensor::zeros({1, bwd.hidden_size});
  for (std::size_t t = steps; t-- > 0;) {
    auto [nh, nc] = bwd.lstm_step(slice_rows(seq, t, 1), h, c);
    h = nh;
    c = nc;
    h_bwd[t] = h;
  }

  Tensor fwd_stack = concat_rows(h_fwd);
  Tensor bwd_stack = concat_rows(h_bwd);
  std::vector<Tensor> both{fwd_stack, bwd_stack};
  return merge.forward(concat_cols(both));
}

Conv1DLayer::Conv1DLayer(std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel_width, std::size_t stride_, Padding padding_,
                         Rng& rng)
    : kernels(glorot_uniform({out_channels, in_channels, kernel_width},
                             in_channels * kernel_width, out_channels, rng)),
      bias(Tensor::zeros({out_channels}, true)),
      stride(stride_),
      padding(padding_) {
  if (kernel_width < 1) throw ContractError("kernel_width must be >= 1");
  if (stride < 1) throw ContractError("stride must be >= 1");
}

std::size_t Conv1DLayer::output_length(std::size_t input_length) const {
  const std::size_t k = kernel_width();
  if (padding == Padding::none) {
    if (input_length < k) {
      throw DimensionError("conv1d input length " + std::to_string(input_length) +
                           " is shorter than kernel width " + std::to_string(k));
    }
    return (input_length - k) / stride + 1;
  }
  return (input_length + stride - 1) / stride;  // ceil(L / stride)
}

Tensor Conv1DLayer::forward(const Tensor& seq) const {
  if (seq.shape().size() != 2 || seq.rows() != in_channels()) {
    throw DimensionError("conv1d expects [" + std::to_string(in_channels()) +
                         " x L], got " + shape_to_string(seq.shape()));
  }
  const std::size_t in_ch = in_channels(), out_ch = out_channels(), k = kernel_width();
  const std::size_t length = seq.cols();
  const std::size_t out_len = output_length(length);

  std::size_t pad_left = 0, padded_len = length;
  if (padding == Padding::same) {
    const std::size_t reach = (out_len - 1) * stride + k;
    const std::size_t pad_total = reach > length ? reach - length : 0;
    pad_left = pad_total / 2;
    padded_len = length + pad_total;
  }

  std::vector<double> padded(in_ch * padded_len, 0.0);
  auto vin = seq.values();
  for (std::size_t ic = 0; ic < in_ch; ++ic)
    for (std::size_t p = 0; p < length; ++p)
      padded[ic * padded_len + pad_left + p] = vin[ic * length + p];

  auto vk = kernels.values();
  auto vb = bias.values();
  std::vector<double> out(out_ch * out_len);
  for (std::size_t oc = 0; oc < out_ch; ++oc) {
    for (std::size_t j = 0; j < out_len; ++j) {
      double acc = vb[oc];
      for (std::size_t ic = 0; ic < in_ch; ++ic) {
        const double* w = vk.data() + (oc * in_ch + ic) * k;
        const double* s = padded.data() + ic * padded_len + j * stride;
        for (std::size_t kk = 0; kk < k; ++kk) acc += w[kk] * s[kk];
      }
      out[oc * out_len + j] = acc;
    }
  }

  const bool tracked =
      Tape::active() != nullptr &&
      (kernels.requires_grad() || bias.requires_grad() || seq.requires_grad());
  Tensor result = detail::make_output({out_ch, out_len}, std::move(out), tracked, "conv1d");
  if (tracked) {
    auto kn = kernels.node();
    auto bn = bias.node();
    auto sn = seq.node();
    auto rn = result.node();
    const std::size_t stride_copy = stride;
    Tape::active()->record([kn, bn, sn, rn, padded, in_ch, out_ch, k, out_len, padded_len,
                            pad_left, length, stride_copy]() {
      rn->ensure_grad();
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t oc = 0; oc < out_ch; ++oc)
          for (std::size_t j = 0; j < out_len; ++j) bn->grad[oc] += rn->grad[oc * out_len + j];
      }
      if (kn->requires_grad) {
        kn->ensure_grad();
        for (std::size_t oc = 0; oc < out_ch; ++oc)
          for (std::size_t ic = 0; ic < in_ch; ++ic)
            for (std::size_t kk = 0; kk < k; ++kk) {
              double acc = 0.0;
              for (std::size_t j = 0; j < out_len; ++j)
                acc += rn->grad[oc * out_len + j] * padded[ic * padded_len + j * stride_copy + kk];
              kn->grad[(oc * in_ch + ic) * k + kk] += acc;
            }
      }
      if (sn->requires_grad) {
        sn->ensure_grad();
        for (std::size_t oc = 0; oc < out_ch; ++oc)
          for (std::size_t ic = 0; ic < in_ch; ++ic)
            for (std::size_t j = 0; j < out_len; ++j) {
              const double g = rn->grad[oc * out_len + j];
              if (g == 0.0) continue;
              for (std::size_t kk = 0; kk < k; ++kk) {
                const std::size_t p = j * stride_copy + kk;
                if (p >= pad_left && p - pad_left < length)
                  sn->grad[ic * length + (p - pad_left)] +=
                      g * kn->values[(oc * in_ch + ic) * k + kk];
              }
            }
      }
    });
  }
  return result;
}

BatchNormLayer::BatchNormLayer(std::size_t features)
    : gamma(Tensor::full({features}, 1.0, true)),
      beta(Tensor::zeros({features}, true)),
      running_mean(Tensor::zeros({features})),
      running_var(Tensor::full({features}, 1.0)) {}

Tensor BatchNormLayer::forward(const Tensor& x, bool training) {
  const std::size_t features_n = features();
  if (x.shape().size() != 2 || x.cols() != features_n) {
    throw DimensionError("batchnorm expects [batch x " + std::to_string(features_n) +
                         "], got " + shape_to_string(x.shape()));
  }
  const std::size_t batch = x.rows();
  if (training && batch < 2) {
    throw ContractError("batchnorm in training mode needs a batch of at least 2");
  }

  auto vx = x.values();
  std::vector<double> mean_v(features_n, 0.0), var_v(features_n, 0.0);
  if (training) {
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < features_n; ++j) mean_v[j] += vx[i * features_n + j];
    for (double& m : mean_v) m /= static_cast<double>(batch);
    for (std::size_t i = 0; i < batch; ++i)
      for (std::size_t j = 0; j < features_n; ++j) {
        const double d = vx[i * features_n + j] - mean_v[j];
        var_v[j] += d * d;
      }
    for (double& v : var_v) v /= static_cast<double>(batch);

    auto rm = running_mean.values();
    auto rv = running_var.values();
    for (std::size_t j = 0; j < features_n; ++j) {
      rm[j] = momentum * rm[j] + (1.0 - momentum) * mean_v[j];
      rv[j] = momentum * rv[j] + (1.0 - momentum) * var_v[j];
    }
  } else {
    auto rm = running_mean.values();
    auto rv = running_var.values();
    mean_v.assign(rm.begin(), rm.end());
    var_v.assign(rv.begin(), rv.end());
  }

  std::vector<double> inv_std(features_n);
  for (std::size_t j = 0; j < features_n; ++j) inv_std[j] = 1.0 / std::sqrt(var_v[j] + epsilon);

  auto vg = gamma.values();
  auto vbeta = beta.values();
  std::vector<double> normalized(batch * features_n);
  std::vector<double> out(batch * features_n);
  for (std::size_t i = 0; i < batch; ++i)
    for (std::size_t j = 0; j < features_n; ++j) {
      const double nx = (vx[i * features_n + j] - mean_v[j]) * inv_std[j];
      normalized[i * features_n + j] = nx;
      out[i * features_n + j] = vg[j] * nx + vbeta[j];
    }

  const bool tracked = Tape::active() != nullptr &&
                       (gamma.requires_grad() || beta.requires_grad() || x.requires_grad());
  Tensor result = detail::make_output({batch, features_n}, std::move(out), tracked, "batchnorm");
  if (tracked) {
    auto gn = gamma.node();
    auto betan = beta.node();
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([gn, betan, xn, rn, normalized, inv_std, batch, features_n,
                            training]() {
      rn->ensure_grad();
      if (betan->requires_grad) {
        betan->ensure_grad();
        for (std::size_t i = 0; i < batch; ++i)
          for (std::size_t j = 0; j < features_n; ++j)
            betan->grad[j] += rn->grad[i * features_n + j];
      }
      if (gn->requires_grad) {
        gn->ensure_grad();
        for (std::size_t i = 0; i < batch; ++i)
          for (std::size_t j = 0; j < features_n; ++j)
            gn->grad[j] += rn->grad[i * features_n + j] * normalized[i * features_n + j];
      }
      if (xn->requires_grad) {
        xn->ensure_grad();
        if (training) {
          // dx = (gamma * inv_std / N) * (N*g - sum(g) - x_hat * sum(g*x_hat))
          const double inv_n = 1.0 / static_cast<double>(batch);
          for (std::size_t j = 0; j < features_n; ++j) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t i = 0; i < batch; ++i) {
              const double g = rn->grad[i * features_n + j];
              sum_g += g;
              sum_gx += g * normalized[i * features_n + j];
            }
            const double a = gn->values[j] * inv_std[j];
            for (std::size_t i = 0; i < batch; ++i) {
              const double g = rn->grad[i * features_n + j];
              const double nx = normalized[i * features_n + j];
              xn->grad[i * features_n + j] +=
                  a * (g - inv_n * sum_g - inv_n * nx * sum_gx);
            }
          }
        } else {
          for (std::size_t i = 0; i < batch; ++i)
            for (std::size_t j = 0; j < features_n; ++j)
              xn->grad[i * features_n + j] +=
                  rn->grad[i * features_n + j] * gn->values[j] * inv_std[j];
        }
      }
    });
  }
  return result;
}

}  // namespace rulkit
