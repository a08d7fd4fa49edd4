#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rulkit/attention.hpp"
#include "rulkit/layers.hpp"

namespace rulkit {

enum class HeadType { fnn, srnn, gru, lstm, bilstm, cnn, cnlstm, san };
enum class HeadMode { single_head, multi_head };

HeadType head_type_from_string(const std::string& name);
const char* to_string(HeadType type);
HeadMode head_mode_from_string(const std::string& name);
const char* to_string(HeadMode mode);

struct ConvSpec {
  std::size_t kernel_width = 5;
  std::size_t channels = 16;
  std::size_t stride = 1;
  Padding padding = Padding::same;
};

/// Declarative description of one feature-extraction head.
/// layer_sizes means, per head type:
///   fnn            dense widths (last entry is the feature size)
///   srnn/gru/lstm  [0] is the hidden size
///   bilstm         [0] is the hidden size per direction (merge output too)
///   cnlstm         [0] is the lstm hidden size after the convolution
///   cnn            unused (the conv spec defines the head)
///   san            one attention dimension per attention block
/// Leaving it empty picks the head type's default widths.
struct HeadSpec {
  HeadType head_type = HeadType::fnn;
  std::vector<std::size_t> layer_sizes;
  std::optional<AttentionConfig> attention;
  std::optional<ConvSpec> conv;
};

/// Default widths per head type: fnn {64, 32}; recurrent hidden 32 (bilstm
/// 32 per direction, cnlstm lstm 32); san two attention blocks of 32.
std::vector<std::size_t> default_layer_sizes(HeadType type);

/// Whole-architecture description. In multi_head mode the model instantiates
/// n_signals independent heads, one per input signal; single_head feeds all
/// signals to one head. The trunk is a dense stack over the concatenated
/// head features; a final linear unit producing the scalar RUL is appended
/// after trunk_sizes.
struct ModelSpec {
  HeadMode mode = HeadMode::multi_head;
  HeadSpec head;
  std::size_t n_signals = 0;
  std::vector<std::size_t> trunk_sizes{64, 32};
  std::size_t window_length = 90;
  std::uint64_t seed = 0;
};

/// Violations of the architecture's structural rules; empty means buildable.
std::vector<std::string> validate_model_spec(const ModelSpec& spec);

class Model {
 public:
  struct Forward {
    Tensor output;                       // [batch x 1]
    std::vector<Tensor> attention_maps;  // every weight matrix of this pass
  };

  /// windows is [batch x window_length x n_signals]; training toggles
  /// batch-norm statistics and has no other effect.
  Forward forward(const Tensor& windows, bool training);

  /// Feature matrix [batch x F_i] of a single head, for head-level probes.
  Tensor head_features(const Tensor& windows, std::size_t head_index, bool training);

  std::vector<Tensor> parameters() const;
  /// Kernels and biases belonging to attention layers only (L2-regularized).
  std::vector<Tensor> attention_parameters() const;

  const ModelSpec& spec() const { return spec_; }
  std::size_t n_heads() const { return heads_.size(); }
  /// Frobenius penalty coefficient of the configured attention, 0 when the
  /// model has no attention layers.
  double attention_regularizer_weight() const;

 private:
  struct Head {
    HeadType type = HeadType::fnn;
    std::size_t input_signals = 1;
    std::size_t signal_offset = 0;  // first signal consumed by this head
    std::vector<DenseLayer> dense;
    std::optional<RecurrentCell> cell;
    std::optional<RecurrentCell> cell_bwd;
    std::optional<DenseLayer> merge;
    std::optional<Conv1DLayer> conv;
    std::vector<SelfAttentionLayer> attention;
    std::vector<BatchNormLayer> block_norms;  // san blocks
    std::size_t feature_size = 0;
  };

  Tensor run_head(Head& head, const Tensor& windows, bool training,
                  std::vector<Tensor>* attention_maps);

  ModelSpec spec_;
  std::vector<Head> heads_;
  std::vector<DenseLayer> trunk_;
  std::vector<BatchNormLayer> trunk_norms_;
  DenseLayer output_layer_;

  friend Model build_model(const ModelSpec& spec);
  friend Model build_san(const ModelSpec& spec);
};

/// Assembles the architecture described by spec with seed-deterministic
/// initialization. Delegates to build_san for san heads.
Model build_model(const ModelSpec& spec);

/// Stand-alone attention network: stacked self-attention blocks with
/// leaky-relu and batch normalization, no recurrent or convolution layers.
Model build_san(const ModelSpec& spec);

/// Total number of trainable scalars across heads and trunk.
std::size_t count_params(const Model& model);

}  // namespace rulkit
