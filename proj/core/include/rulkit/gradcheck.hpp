#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rulkit/tensor.hpp"

namespace rulkit {

/// Outcome of a finite-difference gradient verification.
struct GradCheckReport {
  struct ParamResult {
    std::string name;
    double max_rel_err = 0.0;
  };
  std::vector<ParamResult> per_param;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool passed = false;
};

/// Compares reverse-mode gradients of the scalar function f against central
/// finite differences, parameter by parameter. f must be deterministic given
/// the parameter values; it is re-evaluated forward-only for every wiggled
/// element. The relative error per element is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
/// A result above tol is reported in the return value, never thrown.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  std::span<Tensor> params, double step = 1e-5,
                                  double tol = 1e-4);

}  // namespace rulkit
