#include "rulkit/model.hpp"

#include <algorithm>

namespace rulkit {

HeadType head_type_from_string(const std::string& name) {
  if (name == "fnn") return HeadType::fnn;
  if (name == "srnn") return HeadType::srnn;
  if (name == "gru") return HeadType::gru;
  if (name == "lstm") return HeadType::lstm;
  if (name == "bilstm") return HeadType::bilstm;
  if (name == "cnn") return HeadType::cnn;
  if (name == "cnlstm") return HeadType::cnlstm;
  if (name == "san") return HeadType::san;
  throw ConfigError("unknown head type '" + name + "'");
}

const char* to_string(HeadType type) {
  switch (type) {
    case HeadType::fnn: return "fnn";
    case HeadType::srnn: return "srnn";
    case HeadType::gru: return "gru";
    case HeadType::lstm: return "lstm";
    case HeadType::bilstm: return "bilstm";
    case HeadType::cnn: return "cnn";
    case HeadType::cnlstm: return "cnlstm";
    case HeadType::san: return "san";
  }
  return "unknown";
}

HeadMode head_mode_from_string(const std::string& name) {
  if (name == "single_head") return HeadMode::single_head;
  if (name == "multi_head") return HeadMode::multi_head;
  throw ConfigError("unknown head mode '" + name + "'");
}

const char* to_string(HeadMode mode) {
  return mode == HeadMode::single_head ? "single_head" : "multi_head";
}

std::vector<std::size_t> default_layer_sizes(HeadType type) {
  switch (type) {
    case HeadType::fnn: return {64, 32};
    case HeadType::srnn:
    case HeadType::gru:
    case HeadType::lstm:
    case HeadType::bilstm:
    case HeadType::cnlstm: return {32};
    case HeadType::cnn: return {32};  // unused by the head, kept non-empty
    case HeadType::san: return {32, 32};
  }
  return {32};
}

std::vector<std::string> validate_model_spec(const ModelSpec& spec) {
  std::vector<std::string> violations;
  if (spec.n_signals == 0) violations.push_back("n_signals must be positive");
  if (spec.window_length == 0) violations.push_back("window_length must be positive");
  for (std::size_t s : spec.head.layer_sizes) {
    if (s == 0) {
      violations.push_back("head layer_sizes entries must be positive");
      break;
    }
  }
  for (std::size_t s : spec.trunk_sizes) {
    if (s == 0) {
      violations.push_back("trunk_sizes entries must be positive");
      break;
    }
  }
  const bool conv_head =
      spec.head.head_type == HeadType::cnn || spec.head.head_type == HeadType::cnlstm;
  if (conv_head && !spec.head.conv.has_value()) {
    violations.push_back("conv heads need a conv spec");
  }
  if (!conv_head && spec.head.conv.has_value()) {
    violations.push_back("a conv spec is only valid for cnn and cnlstm heads");
  }
  if (spec.head.conv) {
    if (spec.head.conv->kernel_width == 0) violations.push_back("conv kernel_width must be >= 1");
    if (spec.head.conv->channels == 0) violations.push_back("conv channels must be >= 1");
    if (spec.head.conv->stride == 0) violations.push_back("conv stride must be >= 1");
    if (spec.head.conv->padding == Padding::none &&
        spec.head.conv->kernel_width > spec.window_length) {
      violations.push_back("conv kernel is wider than the window");
    }
  }
  if (spec.head.attention && spec.head.attention->regularizer_weight < 0.0) {
    violations.push_back("attention regularizer_weight must be >= 0");
  }
  if (spec.head.head_type == HeadType::san && spec.head.attention &&
      spec.head.attention->mode == AttentionMode::hard && spec.window_length == 1) {
    // degenerate but legal; no violation
  }
  return violations;
}

namespace {

constexpr std::size_t kEnsembleAttentionDim = 32;

// names show up in numeric-abort diagnostics
void name_parameters(Model& model) {
  auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name().empty()) {
      params[i].set_name("parameter " + std::to_string(i) + " " +
                         shape_to_string(params[i].shape()));
    }
  }
}

void throw_if_invalid(const ModelSpec& spec) {
  auto violations = validate_model_spec(spec);
  if (!violations.empty()) {
    std::string message = "invalid model spec:";
    for (const auto& v : violations) message += "\n  - " + v;
    throw ConfigError(message);
  }
}

// Untracked input views. The window tensor itself never requires gradients,
// so these are plain data rearrangements outside the tape.

// [batch x T] holding one signal's window per row.
Tensor signal_matrix(const Tensor& windows, std::size_t signal) {
  const std::size_t batch = windows.shape()[0];
  const std::size_t steps = windows.shape()[1];
  const std::size_t signals = windows.shape()[2];
  auto v = windows.values();
  std::vector<double> out(batch * steps);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      out[b * steps + t] = v[(b * steps + t) * signals + signal];
  return Tensor::from_data({batch, steps}, std::move(out));
}

// [batch x width] slice of all signals at one timestep.
Tensor time_slice(const Tensor& windows, std::size_t t, std::size_t first_signal,
                  std::size_t width) {
  const std::size_t batch = windows.shape()[0];
  const std::size_t steps = windows.shape()[1];
  const std::size_t signals = windows.shape()[2];
  auto v = windows.values();
  std::vector<double> out(batch * width);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t s = 0; s < width; ++s)
      out[b * width + s] = v[(b * steps + t) * signals + first_signal + s];
  return Tensor::from_data({batch, width}, std::move(out));
}

// [T x width] sequence of one sample.
Tensor sample_sequence(const Tensor& windows, std::size_t sample, std::size_t first_signal,
                       std::size_t width) {
  const std::size_t steps = windows.shape()[1];
  const std::size_t signals = windows.shape()[2];
  auto v = windows.values();
  std::vector<double> out(steps * width);
  for (std::size_t t = 0; t < steps; ++t)
    for (std::size_t s = 0; s < width; ++s)
      out[t * width + s] = v[(sample * steps + t) * signals + first_signal + s];
  return Tensor::from_data({steps, width}, std::move(out));
}

// [(batch*T) x width] with rows ordered sample-major, for per-timestep dense.
Tensor per_timestep_matrix(const Tensor& windows, std::size_t first_signal, std::size_t width) {
  const std::size_t batch = windows.shape()[0];
  const std::size_t steps = windows.shape()[1];
  const std::size_t signals = windows.shape()[2];
  auto v = windows.values();
  std::vector<double> out(batch * steps * width);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t s = 0; s < width; ++s)
        out[(b * steps + t) * width + s] = v[(b * steps + t) * signals + first_signal + s];
  return Tensor::from_data({batch * steps, width}, std::move(out));
}

Tensor mean_over_rows(const Tensor& x) {
  const std::size_t rows = x.rows();
  return matmul(Tensor::full({1, rows}, 1.0 / static_cast<double>(rows)), x);
}

// last hidden state + mean attention context, one feature row per sample
Tensor pool_sequence_with_attention(const SelfAttentionLayer& attention, const Tensor& stacked,
                                    const Tensor& last, std::size_t batch, std::size_t steps,
                                    std::vector<Tensor>* attention_maps) {
  std::vector<Tensor> rows;
  rows.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor seq = strided_rows(stacked, b, batch, steps);  // [T x H]
    auto out = attention.forward(seq);
    if (attention_maps) attention_maps->push_back(out.weights);
    Tensor pooled = mean_over_rows(out.context);
    std::vector<Tensor> parts{slice_rows(last, b, 1), pooled};
    rows.push_back(concat_cols(parts));
  }
  return concat_rows(rows);
}

}  // namespace

Model build_model(const ModelSpec& raw_spec) {
  ModelSpec spec = raw_spec;
  if (spec.head.layer_sizes.empty())
    spec.head.layer_sizes = default_layer_sizes(spec.head.head_type);
  if (spec.head.head_type == HeadType::san) return build_san(spec);
  throw_if_invalid(spec);

  Model model;
  model.spec_ = spec;
  Rng rng(spec.seed);

  const std::size_t n_heads = spec.mode == HeadMode::multi_head ? spec.n_signals : 1;
  const std::size_t head_width = spec.mode == HeadMode::multi_head ? 1 : spec.n_signals;
  const std::size_t steps = spec.window_length;
  const AttentionConfig attn_config = spec.head.attention.value_or(AttentionConfig{});

  for (std::size_t i = 0; i < n_heads; ++i) {
    Model::Head head;
    head.type = spec.head.head_type;
    head.input_signals = head_width;
    head.signal_offset = spec.mode == HeadMode::multi_head ? i : 0;

    switch (spec.head.head_type) {
      case HeadType::fnn: {
        // with attention the dense stack runs per timestep so there is a
        // sequence left to attend over; without it the window is flattened
        std::size_t in = spec.head.attention ? head_width : steps * head_width;
        for (std::size_t width : spec.head.layer_sizes) {
          head.dense.emplace_back(in, width, Activation::leaky_relu, rng);
          in = width;
        }
        const std::size_t feat = spec.head.layer_sizes.back();
        if (spec.head.attention) {
          head.attention.push_back(
              SelfAttentionLayer::make(feat, kEnsembleAttentionDim, attn_config, rng));
          head.feature_size = steps * feat;
        } else {
          head.feature_size = feat;
        }
        break;
      }
      case HeadType::srnn:
      case HeadType::gru:
      case HeadType::lstm: {
        const std::size_t hidden = spec.head.layer_sizes.front();
        if (spec.head.head_type == HeadType::srnn)
          head.cell = RecurrentCell::srnn(head_width, hidden, rng);
        else if (spec.head.head_type == HeadType::gru)
          head.cell = RecurrentCell::gru(head_width, hidden, rng);
        else
          head.cell = RecurrentCell::lstm(head_width, hidden, rng);
        if (spec.head.attention) {
          head.attention.push_back(
              SelfAttentionLayer::make(hidden, kEnsembleAttentionDim, attn_config, rng));
          head.feature_size = 2 * hidden;
        } else {
          head.feature_size = hidden;
        }
        break;
      }
      case HeadType::bilstm: {
        const std::size_t hidden = spec.head.layer_sizes.front();
        head.cell = RecurrentCell::lstm(head_width, hidden, rng);
        head.cell_bwd = RecurrentCell::lstm(head_width, hidden, rng);
        head.merge = DenseLayer(2 * hidden, hidden, Activation::identity, rng);
        if (spec.head.attention) {
          head.attention.push_back(
              SelfAttentionLayer::make(hidden, kEnsembleAttentionDim, attn_config, rng));
          head.feature_size = 2 * hidden;
        } else {
          head.feature_size = hidden;
        }
        break;
      }
      case HeadType::cnn: {
        const ConvSpec& conv = *spec.head.conv;
        head.conv = Conv1DLayer(head_width, conv.channels, conv.kernel_width, conv.stride,
                                conv.padding, rng);
        const std::size_t out_len = head.conv->output_length(steps);
        if (spec.head.attention) {
          head.attention.push_back(
              SelfAttentionLayer::make(conv.channels, kEnsembleAttentionDim, attn_config, rng));
        }
        head.feature_size = conv.channels * out_len;
        break;
      }
      case HeadType::cnlstm: {
        const ConvSpec& conv = *spec.head.conv;
        head.conv = Conv1DLayer(head_width, conv.channels, conv.kernel_width, conv.stride,
                                conv.padding, rng);
        const std::size_t hidden = spec.head.layer_sizes.front();
        head.cell = RecurrentCell::lstm(conv.channels, hidden, rng);
        if (spec.head.attention) {
          head.attention.push_back(
              SelfAttentionLayer::make(hidden, kEnsembleAttentionDim, attn_config, rng));
          head.feature_size = 2 * hidden;
        } else {
          head.feature_size = hidden;
        }
        break;
      }
      case HeadType::san:
        throw ContractError("san heads are built by build_san");
    }
    model.heads_.push_back(std::move(head));
  }

  std::size_t trunk_in = 0;
  for (const auto& head : model.heads_) trunk_in += head.feature_size;
  for (std::size_t width : spec.trunk_sizes) {
    model.trunk_.emplace_back(trunk_in, width, Activation::leaky_relu, rng);
    model.trunk_norms_.emplace_back(width);
    trunk_in = width;
  }
  model.output_layer_ = DenseLayer(trunk_in, 1, Activation::identity, rng);
  name_parameters(model);
  return model;
}

Model build_san(const ModelSpec& raw_spec) {
  ModelSpec spec = raw_spec;
  if (spec.head.head_type != HeadType::san) {
    throw ConfigError("build_san needs head_type = san");
  }
  if (spec.head.layer_sizes.empty())
    spec.head.layer_sizes = default_layer_sizes(spec.head.head_type);
  throw_if_invalid(spec);

  Model model;
  model.spec_ = spec;
  Rng rng(spec.seed);

  const std::size_t n_heads = spec.mode == HeadMode::multi_head ? spec.n_signals : 1;
  const std::size_t head_width = spec.mode == HeadMode::multi_head ? 1 : spec.n_signals;
  const AttentionConfig attn_config = spec.head.attention.value_or(AttentionConfig{});

  for (std::size_t i = 0; i < n_heads; ++i) {
    Model::Head head;
    head.type = HeadType::san;
    head.input_signals = head_width;
    head.signal_offset = spec.mode == HeadMode::multi_head ? i : 0;
    for (std::size_t attn_dim : spec.head.layer_sizes) {
      head.attention.push_back(
          SelfAttentionLayer::make(head_width, attn_dim, attn_config, rng));
      head.block_norms.emplace_back(head_width);
    }
    head.feature_size = spec.window_length * head_width;
    model.heads_.push_back(std::move(head));
  }

  std::size_t trunk_in = 0;
  for (const auto& head : model.heads_) trunk_in += head.feature_size;
  for (std::size_t width : spec.trunk_sizes) {
    model.trunk_.emplace_back(trunk_in, width, Activation::leaky_relu, rng);
    model.trunk_norms_.emplace_back(width);
    trunk_in = width;
  }
  model.output_layer_ = DenseLayer(trunk_in, 1, Activation::identity, rng);
  name_parameters(model);
  return model;
}

Tensor Model::run_head(Head& head, const Tensor& windows, bool training,
                       std::vector<Tensor>* attention_maps) {
  const std::size_t batch = windows.shape()[0];
  const std::size_t steps = windows.shape()[1];

  switch (head.type) {
    case HeadType::fnn: {
      if (head.attention.empty()) {
        Tensor x = head.input_signals == 1
                       ? signal_matrix(windows, head.signal_offset)
                       : reshape(windows, {batch, steps * head.input_signals});
        for (const DenseLayer& layer : head.dense) x = layer.forward(x);
        return x;
      }
      Tensor x = per_timestep_matrix(windows, head.signal_offset, head.input_signals);
      for (const DenseLayer& layer : head.dense) x = layer.forward(x);
      const std::size_t feat = head.dense.back().output_size();
      std::vector<Tensor> rows;
      rows.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        Tensor seq = slice_rows(x, b * steps, steps);
        auto out = head.attention.front().forward(seq);
        if (attention_maps) attention_maps->push_back(out.weights);
        rows.push_back(reshape(out.context, {1, steps * feat}));
      }
      return concat_rows(rows);
    }

    case HeadType::srnn:
    case HeadType::gru:
    case HeadType::lstm: {
      const RecurrentCell& cell = *head.cell;
      const bool with_attention = !head.attention.empty();
      Tensor h = Tensor::zeros({batch, cell.hidden_size});
      Tensor c = Tensor::zeros({batch, cell.hidden_size});
      Tensor feature;  // last-step output (y for srnn, h otherwise)
      std::vector<Tensor> sequence;
      if (with_attention) sequence.reserve(steps);
      for (std::size_t t = 0; t < steps; ++t) {
        Tensor x_t = time_slice(windows, t, head.signal_offset, head.input_signals);
        if (head.type == HeadType::srnn) {
          auto [nh, ny] = cell.srnn_step(x_t, h);
          h = nh;
          feature = ny;
        } else if (head.type == HeadType::gru) {
          h = cell.gru_step(x_t, h);
          feature = h;
        } else {
          auto [nh, nc] = cell.lstm_step(x_t, h, c);
          h = nh;
          c = nc;
          feature = h;
        }
        if (with_attention) sequence.push_back(feature);
      }
      if (!with_attention) return feature;
      Tensor stacked = concat_rows(sequence);  // [(T*batch) x H], time-major
      return pool_sequence_with_attention(head.attention.front(), stacked, feature, batch,
                                          steps, attention_maps);
    }

    case HeadType::bilstm: {
      std::vector<Tensor> rows;
      rows.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        Tensor seq = sample_sequence(windows, b, head.signal_offset, head.input_signals);
        Tensor merged = bilstm_forward(*head.cell, *head.cell_bwd, *head.merge, seq);
        Tensor last = slice_rows(merged, steps - 1, 1);
        if (head.attention.empty()) {
          rows.push_back(last);
        } else {
          auto out = head.attention.front().forward(merged);
          if (attention_maps) attention_maps->push_back(out.weights);
          std::vector<Tensor> parts{last, mean_over_rows(out.context)};
          rows.push_back(concat_cols(parts));
        }
      }
      return concat_rows(rows);
    }

    case HeadType::cnn: {
      std::vector<Tensor> rows;
      rows.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        Tensor seq = sample_sequence(windows, b, head.signal_offset, head.input_signals);
        Tensor feature_map = leaky_relu(head.conv->forward(transpose(seq)));  // [C x L']
        if (head.attention.empty()) {
          rows.push_back(reshape(feature_map, {1, feature_map.size()}));
        } else {
          auto out = head.attention.front().forward(transpose(feature_map));
          if (attention_maps) attention_maps->push_back(out.weights);
          rows.push_back(reshape(out.context, {1, out.context.size()}));
        }
      }
      return concat_rows(rows);
    }

    case HeadType::cnlstm: {
      const std::size_t out_len = head.conv->output_length(steps);
      std::vector<Tensor> maps;
      maps.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        Tensor seq = sample_sequence(windows, b, head.signal_offset, head.input_signals);
        maps.push_back(transpose(leaky_relu(head.conv->forward(transpose(seq)))));  // [L' x C]
      }
      Tensor stacked = concat_rows(maps);  // [(batch*L') x C], sample-major
      const RecurrentCell& cell = *head.cell;
      Tensor h = Tensor::zeros({batch, cell.hidden_size});
      Tensor c = Tensor::zeros({batch, cell.hidden_size});
      std::vector<Tensor> sequence;
      const bool with_attention = !head.attention.empty();
      if (with_attention) sequence.reserve(out_len);
      for (std::size_t t = 0; t < out_len; ++t) {
        Tensor x_t = strided_rows(stacked, t, out_len, batch);
        auto [nh, nc] = cell.lstm_step(x_t, h, c);
        h = nh;
        c = nc;
        if (with_attention) sequence.push_back(h);
      }
      if (!with_attention) return h;
      Tensor time_major = concat_rows(sequence);  // [(L'*batch) x H]
      return pool_sequence_with_attention(head.attention.front(), time_major, h, batch,
                                          out_len, attention_maps);
    }

    case HeadType::san: {
      std::vector<Tensor> rows;
      rows.reserve(batch);
      for (std::size_t b = 0; b < batch; ++b) {
        Tensor seq = sample_sequence(windows, b, head.signal_offset, head.input_signals);
        for (std::size_t block = 0; block < head.attention.size(); ++block) {
          auto out = head.attention[block].forward(seq);
          if (attention_maps) attention_maps->push_back(out.weights);
          // per-sample normalization over the window's timesteps
          seq = head.block_norms[block].forward(leaky_relu(out.context), training);
        }
        rows.push_back(reshape(seq, {1, seq.size()}));
      }
      return concat_rows(rows);
    }
  }
  throw ContractError("unknown head type");
}

Model::Forward Model::forward(const Tensor& windows, bool training) {
  if (!windows.defined() || windows.shape().size() != 3) {
    throw DimensionError("model input must be [batch x window x signals]");
  }
  if (windows.shape()[1] != spec_.window_length || windows.shape()[2] != spec_.n_signals) {
    throw DimensionError("model built for [batch x " + std::to_string(spec_.window_length) +
                         " x " + std::to_string(spec_.n_signals) + "], got " +
                         shape_to_string(windows.shape()));
  }

  Forward result;
  std::vector<Tensor> features;
  features.reserve(heads_.size());
  for (Head& head : heads_)
    features.push_back(run_head(head, windows, training, &result.attention_maps));

  Tensor x = features.size() == 1 ? features.front() : concat_cols(features);
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    x = trunk_[i].forward(x);
    x = trunk_norms_[i].forward(x, training);
  }
  result.output = output_layer_.forward(x);
  return result;
}

Tensor Model::head_features(const Tensor& windows, std::size_t head_index, bool training) {
  if (head_index >= heads_.size()) {
    throw ContractError("head index " + std::to_string(head_index) + " out of range");
  }
  return run_head(heads_[head_index], windows, training, nullptr);
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> params;
  auto take = [&params](const std::vector<Tensor>& more) {
    params.insert(params.end(), more.begin(), more.end());
  };
  for (const Head& head : heads_) {
    for (const DenseLayer& layer : head.dense) take(layer.parameters());
    if (head.cell) take(head.cell->parameters());
    if (head.cell_bwd) take(head.cell_bwd->parameters());
    if (head.merge) take(head.merge->parameters());
    if (head.conv) take(head.conv->parameters());
    for (const SelfAttentionLayer& layer : head.attention) take(layer.parameters());
    for (const BatchNormLayer& norm : head.block_norms) take(norm.parameters());
  }
  for (const DenseLayer& layer : trunk_) take(layer.parameters());
  for (const BatchNormLayer& norm : trunk_norms_) take(norm.parameters());
  take(output_layer_.parameters());
  return params;
}

std::vector<Tensor> Model::attention_parameters() const {
  std::vector<Tensor> params;
  for (const Head& head : heads_) {
    for (const SelfAttentionLayer& layer : head.attention) {
      auto more = layer.parameters();
      params.insert(params.end(), more.begin(), more.end());
    }
  }
  return params;
}

double Model::attention_regularizer_weight() const {
  for (const Head& head : heads_) {
    if (!head.attention.empty()) return head.attention.front().config.regularizer_weight;
  }
  return 0.0;
}

std::size_t count_params(const Model& model) {
  std::size_t total = 0;
  for (const Tensor& p : model.parameters()) total += p.size();
  return total;
}

}  // namespace rulkit
