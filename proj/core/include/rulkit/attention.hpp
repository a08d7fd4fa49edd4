#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rulkit/ops.hpp"
#include "rulkit/rng.hpp"
#include "rulkit/tensor.hpp"

namespace rulkit {

/// How pairwise alignment scores are computed.
///
///   dot              h_t . h_s
///   scaled_dot       h_t . h_s / sqrt(H)
///   additive         the layer's pairwise tanh scorer:
///                    h = tanh(x_t W_t + x_s W_x + b_t), e = sigmoid(W_a h + b_a)
///                    (as a standalone score: v_a . tanh(W_a [h_t; h_s]))
///   content_based    cosine(h_t, h_s)
///   general          h_t^T W_a h_s
///   location_based   W_a h_t, independent of h_s; inside the layer every
///                    row of the score matrix is then constant, so the
///                    softmax yields uniform weights
///   multiplicative   h_t^T W h_s with the layer's own bilinear matrix
///   additive_pair    v_a . tanh(W1 h_t + W2 h_s)
enum class ScoreKind {
  dot,
  scaled_dot,
  additive,
  content_based,
  general,
  location_based,
  multiplicative,
  additive_pair,
};

enum class AttentionMode { soft, hard };

ScoreKind score_kind_from_string(const std::string& name);
const char* to_string(ScoreKind kind);
AttentionMode attention_mode_from_string(const std::string& name);
const char* to_string(AttentionMode mode);

struct AttentionConfig {
  ScoreKind score_kind = ScoreKind::additive;
  AttentionMode mode = AttentionMode::soft;
  double regularizer_weight = 1e-4;
};

/// Weights for the standalone alignment_score op, supplied per kind:
/// additive needs W_a [d_a x 2H] and v_a [d_a]; general and multiplicative
/// need W_a [H x H]; location_based needs W_a [1 x H]; additive_pair needs
/// W1, W2 [H x d_a] and v_a [d_a].
struct AlignmentParams {
  Tensor W_a;
  Tensor v_a;
  Tensor W1, W2;
};

/// Scalar alignment score between two length-H vectors.
Tensor alignment_score(ScoreKind kind, const Tensor& h_t, const Tensor& h_s,
                       const AlignmentParams* params = nullptr);

/// Softmax with max subtraction over a score vector; returns the same shape.
Tensor attention_weights(const Tensor& scores);

/// Self-attention over a [T x d] sequence. The default (additive) scorer is
/// the pairwise tanh network followed by a sigmoid, then a row-wise softmax;
/// the other kinds swap in their own score matrix. Soft mode uses the
/// softmax weights directly; hard mode snaps each row to the one-hot argmax
/// in the forward pass while gradients flow through the soft weights.
struct SelfAttentionLayer {
  AttentionConfig config;
  std::size_t model_dim = 0;  // d
  std::size_t attn_dim = 0;   // d_a

  // pairwise tanh scorer (additive)
  Tensor W_t, W_x, b_t, W_a, b_a;
  // bilinear scorers (general, multiplicative)
  Tensor W_score;  // [d x d]
  // pairwise mlp scorer (additive_pair)
  Tensor W1, W2, v_a;
  // location_based
  Tensor w_loc;  // [d x 1]

  static SelfAttentionLayer make(std::size_t model_dim, std::size_t attn_dim,
                                 AttentionConfig config, Rng& rng);

  struct Output {
    Tensor context;  // [T x d]
    Tensor weights;  // [T x T], row-stochastic (one-hot rows in hard mode)
  };
  Output forward(const Tensor& x) const;

  std::vector<Tensor> parameters() const;
};

/// coefficient * || W W^T - I ||_F^2 for a row-stochastic weight matrix W.
/// Added to the training loss to discourage rank collapse of the attention
/// map; differentiable through W.
Tensor attention_regularizer(const Tensor& weights, double coefficient);

}  // namespace rulkit
