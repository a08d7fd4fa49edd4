#include "rulkit/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <utility>

#include "op_support.hpp"

namespace rulkit {

namespace {

using detail::make_output;
using detail::tracking;

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

// Suffix broadcast: b is applied cyclically over a. Returns b's element count
// after validating that b.shape is equal to or a trailing suffix of a.shape.
std::size_t broadcast_span(const Tensor& a, const Tensor& b, const char* op_name) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sb.size() > sa.size() ||
      !std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) {
    throw DimensionError(std::string(op_name) + ": shape " + shape_to_string(sb) +
                         " does not match or broadcast into " + shape_to_string(sa));
  }
  return shape_numel(sb);
}

template <typename Fwd, typename Bwd>
Tensor binary_op(const Tensor& a, const Tensor& b, const char* op_name, Fwd fwd, Bwd bwd) {
  const std::size_t nb = broadcast_span(a, b, op_name);
  auto va = a.values();
  auto vb = b.values();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(va[i], vb[i % nb]);

  const bool tracked = tracking(a, b);
  Tensor result = make_output(a.shape(), std::move(out), tracked, op_name);
  if (tracked) {
    auto an = a.node();
    auto bn = b.node();
    auto rn = result.node();
    Tape::active()->record([an, bn, rn, nb, bwd]() {
      rn->ensure_grad();
      const bool need_a = an->requires_grad;
      const bool need_b = bn->requires_grad;
      if (need_a) an->ensure_grad();
      if (need_b) bn->ensure_grad();
      for (std::size_t i = 0; i < rn->grad.size(); ++i) {
        const double g = rn->grad[i];
        if (g == 0.0) continue;
        double da = 0.0, db = 0.0;
        bwd(an->values[i], bn->values[i % nb], g, da, db);
        if (need_a) an->grad[i] += da;
        if (need_b) bn->grad[i % nb] += db;
      }
    });
  }
  return result;
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, const char* op_name, Fwd fwd, Bwd bwd) {
  auto vx = x.values();
  std::vector<double> out(vx.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(vx[i]);

  const bool tracked = tracking(x);
  Tensor result = make_output(x.shape(), std::move(out), tracked, op_name);
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, bwd]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < rn->grad.size(); ++i) {
        const double g = rn->grad[i];
        if (g == 0.0) continue;
        xn->grad[i] += g * bwd(xn->values[i], rn->values[i]);
      }
    });
  }
  return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "add",
                   [](double x, double y) { return x + y; },
                   [](double, double, double g, double& da, double& db) {
                     da = g;
                     db = g;
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "sub",
                   [](double x, double y) { return x - y; },
                   [](double, double, double g, double& da, double& db) {
                     da = g;
                     db = -g;
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "mul",
                   [](double x, double y) { return x * y; },
                   [](double x, double y, double g, double& da, double& db) {
                     da = g * y;
                     db = g * x;
                   });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(a, b, "div",
                   [](double x, double y) { return x / y; },
                   [](double x, double y, double g, double& da, double& db) {
                     da = g / y;
                     db = -g * x / (y * y);
                   });
}

Tensor sigmoid(const Tensor& x) {
  return unary_op(x, "sigmoid",
                  [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh_op(const Tensor& x) {
  return unary_op(x, "tanh",
                  [](double v) { return std::tanh(v); },
                  [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary_op(x, "relu",
                  [](double v) { return v > 0.0 ? v : 0.0; },
                  [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  return unary_op(x, "leaky_relu",
                  [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; },
                  [negative_slope](double v, double) { return v > 0.0 ? 1.0 : negative_slope; });
}

Tensor exp_op(const Tensor& x) {
  return unary_op(x, "exp",
                  [](double v) { return std::exp(v); },
                  [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary_op(x, "square",
                  [](double v) { return v * v; },
                  [](double v, double) { return 2.0 * v; });
}

Tensor sqrt_op(const Tensor& x) {
  return unary_op(x, "sqrt",
                  [](double v) { return std::sqrt(v); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(x, "scale",
                  [factor](double v) { return v * factor; },
                  [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary_op(x, "add_scalar",
                  [value](double v) { return v + value; },
                  [](double, double) { return 1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw DimensionError("matmul needs rank-2 tensors, got " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul inner dimensions disagree: " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  {
    ConstMapRM ma(a.values().data(), m, k);
    ConstMapRM mb(b.values().data(), k, n);
    MapRM mo(out.data(), m, n);
    mo.noalias() = ma * mb;
  }

  const bool tracked = tracking(a, b);
  Tensor result = make_output({m, n}, std::move(out), tracked, "matmul");
  if (tracked) {
    auto an = a.node();
    auto bn = b.node();
    auto rn = result.node();
    Tape::active()->record([an, bn, rn, m, k, n]() {
      rn->ensure_grad();
      ConstMapRM gout(rn->grad.data(), m, n);
      if (an->requires_grad) {
        an->ensure_grad();
        MapRM ga(an->grad.data(), m, k);
        ConstMapRM mb(bn->values.data(), k, n);
        ga.noalias() += gout * mb.transpose();
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        MapRM gb(bn->grad.data(), k, n);
        ConstMapRM ma(an->values.data(), m, k);
        gb.noalias() += ma.transpose() * gout;
      }
    });
  }
  return result;
}

Tensor transpose(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> out(m * n);
  auto vx = x.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = vx[i * n + j];

  const bool tracked = tracking(x);
  Tensor result = make_output({n, m}, std::move(out), tracked, "transpose");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, m, n]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) xn->grad[i * n + j] += rn->grad[j * m + i];
    });
  }
  return result;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw DimensionError("reshape from " + shape_to_string(x.shape()) + " to " +
                         shape_to_string(shape) + " changes the element count");
  }
  auto vx = x.values();
  std::vector<double> out(vx.begin(), vx.end());
  const bool tracked = tracking(x);
  Tensor result = make_output(std::move(shape), std::move(out), tracked, "reshape");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < rn->grad.size(); ++i) xn->grad[i] += rn->grad[i];
    });
  }
  return result;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  const bool tracked = tracking(x);
  Tensor result = make_output({1}, {total}, tracked, "sum");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn]() {
      rn->ensure_grad();
      xn->ensure_grad();
      const double g = rn->grad[0];
      if (g == 0.0) return;
      for (double& gx : xn->grad) gx += g;
    });
  }
  return result;
}

Tensor mean(const Tensor& x) {
  const double inv = 1.0 / static_cast<double>(x.size());
  double total = 0.0;
  for (double v : x.values()) total += v;
  const bool tracked = tracking(x);
  Tensor result = make_output({1}, {total * inv}, tracked, "mean");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, inv]() {
      rn->ensure_grad();
      xn->ensure_grad();
      const double g = rn->grad[0] * inv;
      if (g == 0.0) return;
      for (double& gx : xn->grad) gx += g;
    });
  }
  return result;
}

Tensor sum_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto vx = x.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += vx[i * n + j];

  const bool tracked = tracking(x);
  Tensor result = make_output({m}, std::move(out), tracked, "sum_rows");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, m, n]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const double g = rn->grad[i];
        if (g == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) xn->grad[i * n + j] += g;
      }
    });
  }
  return result;
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto vx = x.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = vx.data() + i * n;
    double mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double e = std::exp(row[j] - mx);
      out[i * n + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= denom;
  }

  const bool tracked = tracking(x);
  Tensor result = make_output({m, n}, std::move(out), tracked, "softmax_rows");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, m, n]() {
      rn->ensure_grad();
      xn->ensure_grad();
      // dx_j = y_j * (g_j - sum_k g_k y_k), per row
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = rn->values.data() + i * n;
        const double* g = rn->grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) xn->grad[i * n + j] += y[j] * (g[j] - dot);
      }
    });
  }
  return result;
}

Tensor hard_rows(const Tensor& x) {
  const std::size_t m = x.rows(), n = x.cols();
  auto vx = x.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = vx.data() + i * n;
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (row[j] > row[best]) best = j;
    out[i * n + best] = 1.0;
  }

  const bool tracked = tracking(x);
  Tensor result = make_output({m, n}, std::move(out), tracked, "hard_rows");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    // straight-through: the one-hot forward is treated as identity in reverse
    Tape::active()->record([xn, rn]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < rn->grad.size(); ++i) xn->grad[i] += rn->grad[i];
    });
  }
  return result;
}

namespace {

Tensor concat_2d(std::span<const Tensor> parts, bool along_rows, const char* op_name) {
  if (parts.empty()) throw ContractError(std::string(op_name) + " needs at least one part");
  const std::size_t fixed = along_rows ? parts.front().cols() : parts.front().rows();
  std::size_t total = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    const std::size_t f = along_rows ? p.cols() : p.rows();
    if (f != fixed) {
      throw DimensionError(std::string(op_name) + ": mismatched extents " +
                           shape_to_string(parts.front().shape()) + " vs " +
                           shape_to_string(p.shape()));
    }
    total += along_rows ? p.rows() : p.cols();
    any_grad = any_grad || p.requires_grad();
  }

  const std::size_t m = along_rows ? total : fixed;
  const std::size_t n = along_rows ? fixed : total;
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    auto vp = p.values();
    if (along_rows) {
      std::copy(vp.begin(), vp.end(), out.begin() + offset * n);
      offset += p.rows();
    } else {
      const std::size_t pc = p.cols();
      for (std::size_t i = 0; i < m; ++i)
        std::copy(vp.begin() + i * pc, vp.begin() + (i + 1) * pc,
                  out.begin() + i * n + offset);
      offset += pc;
    }
  }

  const bool tracked = Tape::active() != nullptr && any_grad;
  Tensor result = make_output({m, n}, std::move(out), tracked, op_name);
  if (tracked) {
    std::vector<std::shared_ptr<detail::TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    auto rn = result.node();
    Tape::active()->record([nodes, rn, m, n, along_rows]() {
      rn->ensure_grad();
      std::size_t offset = 0;
      for (auto& pn : nodes) {
        const std::size_t pr = pn->shape[0];
        const std::size_t pc = pn->shape.size() > 1 ? pn->shape[1] : 1;
        if (pn->requires_grad) {
          pn->ensure_grad();
          if (along_rows) {
            for (std::size_t i = 0; i < pr * pc; ++i) pn->grad[i] += rn->grad[offset * n + i];
          } else {
            for (std::size_t i = 0; i < m; ++i)
              for (std::size_t j = 0; j < pc; ++j)
                pn->grad[i * pc + j] += rn->grad[i * n + offset + j];
          }
        }
        offset += along_rows ? pr : pc;
      }
    });
  }
  return result;
}

}  // namespace

Tensor concat_rows(std::span<const Tensor> parts) {
  for (const Tensor& p : parts) (void)p.rows();  // rank check
  return concat_2d(parts, true, "concat_rows");
}

Tensor concat_cols(std::span<const Tensor> parts) {
  for (const Tensor& p : parts) (void)p.rows();
  return concat_2d(parts, false, "concat_cols");
}

Tensor strided_rows(const Tensor& x, std::size_t first, std::size_t stride,
                    std::size_t count) {
  const std::size_t m = x.rows(), n = x.cols();
  if (count == 0 || stride == 0) throw ContractError("strided_rows needs positive stride and count");
  const std::size_t last = first + stride * (count - 1);
  if (last >= m) {
    throw DimensionError("strided_rows reaches row " + std::to_string(last) + " of " +
                         shape_to_string(x.shape()));
  }
  auto vx = x.values();
  std::vector<double> out(count * n);
  for (std::size_t i = 0; i < count; ++i)
    std::copy(vx.begin() + (first + i * stride) * n, vx.begin() + (first + i * stride + 1) * n,
              out.begin() + i * n);

  const bool tracked = tracking(x);
  Tensor result = make_output({count, n}, std::move(out), tracked, "strided_rows");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, first, stride, count, n]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < n; ++j)
          xn->grad[(first + i * stride) * n + j] += rn->grad[i * n + j];
    });
  }
  return result;
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  return strided_rows(x, begin, 1, count);
}

Tensor repeat_rows(const Tensor& x, std::size_t k) {
  const std::size_t m = x.rows(), n = x.cols();
  if (k == 0) throw ContractError("repeat_rows needs k >= 1");
  auto vx = x.values();
  std::vector<double> out(m * k * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t r = 0; r < k; ++r)
      std::copy(vx.begin() + i * n, vx.begin() + (i + 1) * n, out.begin() + (i * k + r) * n);

  const bool tracked = tracking(x);
  Tensor result = make_output({m * k, n}, std::move(out), tracked, "repeat_rows");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, m, n, k]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t j = 0; j < n; ++j)
            xn->grad[i * n + j] += rn->grad[(i * k + r) * n + j];
    });
  }
  return result;
}

Tensor tile_rows(const Tensor& x, std::size_t k) {
  const std::size_t m = x.rows(), n = x.cols();
  if (k == 0) throw ContractError("tile_rows needs k >= 1");
  auto vx = x.values();
  std::vector<double> out(m * k * n);
  for (std::size_t r = 0; r < k; ++r)
    std::copy(vx.begin(), vx.end(), out.begin() + r * m * n);

  const bool tracked = tracking(x);
  Tensor result = make_output({m * k, n}, std::move(out), tracked, "tile_rows");
  if (tracked) {
    auto xn = x.node();
    auto rn = result.node();
    Tape::active()->record([xn, rn, m, n, k]() {
      rn->ensure_grad();
      xn->ensure_grad();
      for (std::size_t r = 0; r < k; ++r)
        for (std::size_t i = 0; i < m * n; ++i) xn->grad[i] += rn->grad[r * m * n + i];
    });
  }
  return result;
}

Tensor scale_rows(const Tensor& x, const Tensor& factors) {
  const std::size_t m = x.rows(), n = x.cols();
  if (factors.size() != m) {
    throw DimensionError("scale_rows: " + std::to_string(m) + " rows vs " +
                         std::to_string(factors.size()) + " factors");
  }
  auto vx = x.values();
  auto vf = factors.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = vx[i * n + j] * vf[i];

  const bool tracked = tracking(x, factors);
  Tensor result = make_output({m, n}, std::move(out), tracked, "scale_rows");
  if (tracked) {
    auto xn = x.node();
    auto fn = factors.node();
    auto rn = result.node();
    Tape::active()->record([xn, fn, rn, m, n]() {
      rn->ensure_grad();
      const bool need_x = xn->requires_grad;
      const bool need_f = fn->requires_grad;
      if (need_x) xn->ensure_grad();
      if (need_f) fn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          const double g = rn->grad[i * n + j];
          if (g == 0.0) continue;
          if (need_x) xn->grad[i * n + j] += g * fn->values[i];
          if (need_f) fn->grad[i] += g * xn->values[i * n + j];
        }
      }
    });
  }
  return result;
}

Tensor elementwise(ElementwiseKind kind, const Tensor& a, const std::optional<Tensor>& b) {
  const bool binary = kind == ElementwiseKind::add || kind == ElementwiseKind::sub ||
                      kind == ElementwiseKind::mul;
  if (binary && !b.has_value()) throw ContractError("elementwise: binary kind needs two operands");
  if (!binary && b.has_value()) throw ContractError("elementwise: unary kind takes one operand");
  switch (kind) {
    case ElementwiseKind::add: return add(a, *b);
    case ElementwiseKind::sub: return sub(a, *b);
    case ElementwiseKind::mul: return mul(a, *b);
    case ElementwiseKind::sigmoid: return sigmoid(a);
    case ElementwiseKind::tanh: return tanh_op(a);
    case ElementwiseKind::leaky_relu: return leaky_relu(a);
    case ElementwiseKind::exp: return exp_op(a);
    case ElementwiseKind::square: return square(a);
  }
  throw ContractError("elementwise: unknown kind");
}

}  // namespace rulkit
