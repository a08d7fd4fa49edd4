#include "rulkit/tensor.hpp"

#include <cmath>
#include <sstream>

namespace rulkit {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

std::shared_ptr<detail::TensorNode> make_node(Shape shape, std::vector<double> values,
                                              bool requires_grad) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_to_string(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<detail::TensorNode>();
  node->shape = std::move(shape);
  node->values = std::move(values);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

Tensor wrap_node(std::shared_ptr<detail::TensorNode> node) { return Tensor(std::move(node)); }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), 0.0);
  return wrap_node(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), value);
  return wrap_node(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  return wrap_node(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) values[i * n + i] = 1.0;
  return from_data({n, n}, std::move(values), false);
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return shape_numel(shape()); }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->requires_grad = value;
}

std::size_t Tensor::rows() const {
  if (shape().size() != 2) {
    throw ContractError("rows() needs a rank-2 tensor, got " + shape_to_string(shape()));
  }
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (shape().size() != 2) {
    throw ContractError("cols() needs a rank-2 tensor, got " + shape_to_string(shape()));
  }
  return shape()[1];
}

std::span<double> Tensor::values() {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->values;
}

std::span<const double> Tensor::values() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->values;
}

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->values.size();
}

std::span<double> Tensor::grad() {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

std::span<const double> Tensor::grad() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->grad.assign(node_->values.size(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() needs a single-element tensor, got " + shape_to_string(shape()));
  }
  return node_->values[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const std::size_t c = cols();
  if (row >= rows() || col >= c) {
    throw ContractError("index (" + std::to_string(row) + "," + std::to_string(col) +
                        ") out of range for " + shape_to_string(shape()));
  }
  return node_->values[row * c + col];
}

const std::string& Tensor::name() const {
  static const std::string empty;
  return node_ ? node_->name : empty;
}

Tensor& Tensor::set_name(std::string name) {
  if (!node_) throw ContractError("use of an undefined tensor");
  node_->name = std::move(name);
  return *this;
}

bool Tensor::all_finite() const {
  if (!node_) return false;
  for (double v : node_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::clone() const {
  if (!node_) return Tensor();
  Tensor copy = from_data(node_->shape, node_->values, node_->requires_grad);
  copy.node_->name = node_->name;
  return copy;
}

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* Tape::active() noexcept { return g_active_tape; }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss tensor");
  }
  auto node = loss.node();
  node->ensure_grad();
  node->grad[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = previous_; }

}  // namespace rulkit
