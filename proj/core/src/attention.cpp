#include "rulkit/attention.hpp"

#include <cmath>

#include "rulkit/layers.hpp"

namespace rulkit {

ScoreKind score_kind_from_string(const std::string& name) {
  if (name == "dot") return ScoreKind::dot;
  if (name == "scaled_dot") return ScoreKind::scaled_dot;
  if (name == "additive") return ScoreKind::additive;
  if (name == "content_based") return ScoreKind::content_based;
  if (name == "general") return ScoreKind::general;
  if (name == "location_based") return ScoreKind::location_based;
  if (name == "multiplicative") return ScoreKind::multiplicative;
  if (name == "additive_pair") return ScoreKind::additive_pair;
  throw ConfigError("unknown attention score kind '" + name + "'");
}

const char* to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::dot: return "dot";
    case ScoreKind::scaled_dot: return "scaled_dot";
    case ScoreKind::additive: return "additive";
    case ScoreKind::content_based: return "content_based";
    case ScoreKind::general: return "general";
    case ScoreKind::location_based: return "location_based";
    case ScoreKind::multiplicative: return "multiplicative";
    case ScoreKind::additive_pair: return "additive_pair";
  }
  return "unknown";
}

AttentionMode attention_mode_from_string(const std::string& name) {
  if (name == "soft") return AttentionMode::soft;
  if (name == "hard") return AttentionMode::hard;
  throw ConfigError("unknown attention mode '" + name + "'");
}

const char* to_string(AttentionMode mode) {
  return mode == AttentionMode::soft ? "soft" : "hard";
}

namespace {

Tensor as_row(const Tensor& v) { return reshape(v, {1, v.size()}); }
Tensor as_col(const Tensor& v) { return reshape(v, {v.size(), 1}); }

const Tensor& require_param(const Tensor& t, ScoreKind kind, const char* name) {
  if (!t.defined()) {
    throw ConfigError(std::string("alignment score '") + to_string(kind) +
                      "' needs parameter " + name);
  }
  return t;
}

double vector_norm(const Tensor& v) {
  double acc = 0.0;
  for (double x : v.values()) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace

Tensor alignment_score(ScoreKind kind, const Tensor& h_t, const Tensor& h_s,
                       const AlignmentParams* params) {
  if (h_t.size() != h_s.size()) {
    throw DimensionError("alignment_score: vectors of length " + std::to_string(h_t.size()) +
                         " and " + std::to_string(h_s.size()));
  }
  const std::size_t h = h_t.size();
  static const AlignmentParams empty;
  const AlignmentParams& p = params ? *params : empty;

  switch (kind) {
    case ScoreKind::dot:
      return sum(mul(h_t, h_s));
    case ScoreKind::scaled_dot:
      return scale(sum(mul(h_t, h_s)), 1.0 / std::sqrt(static_cast<double>(h)));
    case ScoreKind::additive: {
      const Tensor& W_a = require_param(p.W_a, kind, "W_a");
      const Tensor& v_a = require_param(p.v_a, kind, "v_a");
      std::vector<Tensor> parts{as_col(h_t), as_col(h_s)};
      Tensor hidden = tanh_op(matmul(W_a, concat_rows(parts)));
      return reshape(matmul(as_row(v_a), hidden), {1});
    }
    case ScoreKind::content_based: {
      const double nt = vector_norm(h_t), ns = vector_norm(h_s);
      if (nt == 0.0 || ns == 0.0) {
        throw NumericError("content_based score is undefined for a zero-norm vector");
      }
      return scale(sum(mul(h_t, h_s)), 1.0 / (nt * ns));
    }
    case ScoreKind::general:
    case ScoreKind::multiplicative: {
      const Tensor& W_a = require_param(p.W_a, kind, "W_a");
      return reshape(matmul(matmul(as_row(h_t), W_a), as_col(h_s)), {1});
    }
    case ScoreKind::location_based: {
      const Tensor& W_a = require_param(p.W_a, kind, "W_a");
      return reshape(matmul(W_a, as_col(h_t)), {1});
    }
    case ScoreKind::additive_pair: {
      const Tensor& W1 = require_param(p.W1, kind, "W1");
      const Tensor& W2 = require_param(p.W2, kind, "W2");
      const Tensor& v_a = require_param(p.v_a, kind, "v_a");
      Tensor hidden = tanh_op(add(matmul(as_row(h_t), W1), matmul(as_row(h_s), W2)));
      return reshape(matmul(hidden, as_col(v_a)), {1});
    }
  }
  throw ContractError("unknown score kind");
}

Tensor attention_weights(const Tensor& scores) {
  const Shape original = scores.shape();
  Tensor soft = softmax_rows(reshape(scores, {1, scores.size()}));
  return reshape(soft, original);
}

SelfAttentionLayer SelfAttentionLayer::make(std::size_t model_dim, std::size_t attn_dim,
                                            AttentionConfig config, Rng& rng) {
  if (model_dim == 0 || attn_dim == 0) {
    throw ConfigError("self-attention needs positive model and attention dimensions");
  }
  SelfAttentionLayer layer;
  layer.config = config;
  layer.model_dim = model_dim;
  layer.attn_dim = attn_dim;
  switch (config.score_kind) {
    case ScoreKind::additive:
      layer.W_t = glorot_uniform({model_dim, attn_dim}, model_dim, attn_dim, rng);
      layer.W_x = glorot_uniform({model_dim, attn_dim}, model_dim, attn_dim, rng);
      layer.b_t = Tensor::zeros({attn_dim}, true);
      layer.W_a = glorot_uniform({attn_dim, 1}, attn_dim, 1, rng);
      layer.b_a = Tensor::zeros({1}, true);
      break;
    case ScoreKind::general:
    case ScoreKind::multiplicative:
      layer.W_score = glorot_uniform({model_dim, model_dim}, model_dim, model_dim, rng);
      break;
    case ScoreKind::additive_pair:
      layer.W1 = glorot_uniform({model_dim, attn_dim}, model_dim, attn_dim, rng);
      layer.W2 = glorot_uniform({model_dim, attn_dim}, model_dim, attn_dim, rng);
      layer.v_a = glorot_uniform({attn_dim, 1}, attn_dim, 1, rng);
      break;
    case ScoreKind::location_based:
      layer.w_loc = glorot_uniform({model_dim, 1}, model_dim, 1, rng);
      break;
    case ScoreKind::dot:
    case ScoreKind::scaled_dot:
    case ScoreKind::content_based:
      break;  // parameter-free scorers
  }
  return layer;
}

SelfAttentionLayer::Output SelfAttentionLayer::forward(const Tensor& x) const {
  if (!x.defined() || x.shape().size() != 2) {
    throw ContractError("self-attention expects a [T x d] sequence");
  }
  const std::size_t steps = x.rows();
  if (x.cols() != model_dim) {
    throw DimensionError("self-attention built for d=" + std::to_string(model_dim) +
                         ", got " + shape_to_string(x.shape()));
  }

  Tensor scores;
  switch (config.score_kind) {
    case ScoreKind::additive: {
      Tensor u = matmul(x, W_t);
      Tensor v = matmul(x, W_x);
      // row (t*T + s) of the pairwise block is u_t + v_s
      Tensor hidden = tanh_op(add(add(repeat_rows(u, steps), tile_rows(v, steps)), b_t));
      Tensor e = sigmoid(add(matmul(hidden, W_a), b_a));
      scores = reshape(e, {steps, steps});
      break;
    }
    case ScoreKind::general:
    case ScoreKind::multiplicative:
      scores = matmul(matmul(x, W_score), transpose(x));
      break;
    case ScoreKind::additive_pair: {
      Tensor u = matmul(x, W1);
      Tensor v = matmul(x, W2);
      Tensor hidden = tanh_op(add(repeat_rows(u, steps), tile_rows(v, steps)));
      scores = reshape(matmul(hidden, v_a), {steps, steps});
      break;
    }
    case ScoreKind::dot:
      scores = matmul(x, transpose(x));
      break;
    case ScoreKind::scaled_dot:
      scores = scale(matmul(x, transpose(x)), 1.0 / std::sqrt(static_cast<double>(model_dim)));
      break;
    case ScoreKind::content_based: {
      Tensor norms = sqrt_op(sum_rows(square(x)));
      for (double n : norms.values()) {
        if (n == 0.0) throw NumericError("content_based attention hit a zero-norm row");
      }
      Tensor inv = div(Tensor::full({steps}, 1.0), norms);
      Tensor unit = scale_rows(x, inv);
      scores = matmul(unit, transpose(unit));
      break;
    }
    case ScoreKind::location_based: {
      Tensor per_row = matmul(x, w_loc);  // [T x 1], independent of the source position
      scores = matmul(per_row, Tensor::full({1, steps}, 1.0));
      break;
    }
  }

  Tensor weights = softmax_rows(scores);
  if (config.mode == AttentionMode::hard) weights = hard_rows(weights);
  Tensor context = matmul(weights, x);
  return {context, weights};
}

std::vector<Tensor> SelfAttentionLayer::parameters() const {
  std::vector<Tensor> params;
  for (const Tensor* t : {&W_t, &W_x, &b_t, &W_a, &b_a, &W_score, &W1, &W2, &v_a, &w_loc}) {
    if (t->defined()) params.push_back(*t);
  }
  return params;
}

Tensor attention_regularizer(const Tensor& weights, double coefficient) {
  if (weights.shape().size() != 2 || weights.rows() != weights.cols()) {
    throw DimensionError("attention_regularizer expects a square matrix, got " +
                         shape_to_string(weights.shape()));
  }
  if (coefficient < 0.0) throw ContractError("regularizer coefficient must be >= 0");
  Tensor gram = matmul(weights, transpose(weights));
  Tensor deviation = sub(gram, Tensor::identity(weights.rows()));
  return scale(sum(square(deviation)), coefficient);
}

}  // namespace rulkit
