#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rulkit/error.hpp"

namespace rulkit {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily, same length as values
  bool requires_grad = false;
  std::string name;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Dense row-major tensor of 64-bit floats. A Tensor is a shared handle:
/// copying it aliases the same storage, which is how the autodiff graph
/// links operation inputs to their gradient buffers. Optimizer updates
/// mutate values in place between tape replays.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// n-by-n identity matrix, not tracked by the tape.
  static Tensor identity(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  bool requires_grad() const;
  void set_requires_grad(bool value);

  /// Number of rows/cols of a rank-2 tensor; contract error otherwise.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> values();
  std::span<const double> values() const;

  bool has_grad() const;
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  /// Value of a single-element tensor; contract error otherwise.
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  const std::string& name() const;
  Tensor& set_name(std::string name);

  /// True when all stored values are finite.
  bool all_finite() const;

  /// Deep copy with detached storage (no recorded provenance).
  Tensor clone() const;

  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  std::shared_ptr<detail::TensorNode> node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend class Tape;
  friend Tensor wrap_node(std::shared_ptr<detail::TensorNode>);
};

Tensor wrap_node(std::shared_ptr<detail::TensorNode> node);

/// Ordered record of executed differentiable operations. Forward execution
/// appends entries, so the record is topologically sorted by construction;
/// backward() replays it exactly once in reverse. A tape is confined to one
/// logical thread; independent runs use independent tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Tape currently activated on this thread, or nullptr.
  static Tape* active() noexcept;

  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. Gradients
  /// accumulate additively into every requires_grad tensor reachable from
  /// the loss; they are never zeroed implicitly.
  void backward(const Tensor& loss);

  /// Appends a backward step. Called by operation implementations.
  void record(std::function<void()> backward_step) {
    steps_.push_back(std::move(backward_step));
  }

 private:
  std::vector<std::function<void()>> steps_;
  friend class TapeScope;
};

/// Activates a tape on the current thread for the scope's lifetime.
/// Operations executed with no active tape run forward-only.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace rulkit
