#pragma once

// Internal helpers shared by the operation implementations. Not installed.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rulkit/tensor.hpp"

namespace rulkit::detail {

inline void check_finite(const std::vector<double>& values, const char* op_name) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op_name) + " produced a non-finite value");
    }
  }
}

inline bool tracking(const Tensor& a) {
  return Tape::active() != nullptr && a.requires_grad();
}

inline bool tracking(const Tensor& a, const Tensor& b) {
  return Tape::active() != nullptr && (a.requires_grad() || b.requires_grad());
}

/// Builds the output tensor of an op; marks it requires_grad when the op is
/// being recorded so downstream ops keep extending the graph.
inline Tensor make_output(Shape shape, std::vector<double> values, bool tracked,
                          const char* op_name) {
  check_finite(values, op_name);
  return Tensor::from_data(std::move(shape), std::move(values), tracked);
}

}  // namespace rulkit::detail
