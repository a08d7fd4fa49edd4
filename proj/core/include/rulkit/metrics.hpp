#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rulkit/data.hpp"

namespace rulkit {

class Model;

/// Root mean squared error over paired predictions and truths.
double rmse(std::span<const double> pred, std::span<const double> truth);

/// Asymmetric prognostic penalty with e_i = predicted - true:
///   e_i <  0 (early):  exp(-e_i / 13) - 1
///   e_i >= 0 (late):   exp( e_i / 10) - 1
/// summed over units, so late predictions cost more than early ones of the
/// same magnitude. This is the standard PHM08 convention; the source
/// formulation's printed sign for the late branch would reward lateness and
/// contradicts its own prose, so the convention above is used throughout.
double score(std::span<const double> pred, std::span<const double> truth);

struct UnitPrediction {
  int unit_id = 0;
  double true_rul = 0.0;
  double predicted_rul = 0.0;
  double error = 0.0;  // predicted - true
};

/// One evaluated experiment repeat.
struct EvalReport {
  std::string label;  // model variant, e.g. "FD001/multi_head/fnn"
  double rmse = 0.0;
  double score = 0.0;
  std::vector<UnitPrediction> per_unit;
  std::size_t param_count = 0;
  double wall_time_s = 0.0;
  std::uint64_t seed = 0;
  std::string spec_digest;

  static std::string csv_header(bool with_timing);
  std::string csv_row(bool with_timing) const;
  /// Human-readable block, one field per line.
  std::string text() const;
};

/// Clamps raw predictions to [0, r_early], pairs them with the batch targets
/// and computes both metrics. The model-level evaluate() wraps this.
EvalReport evaluate_predictions(std::span<const double> raw_pred, const WindowBatch& test,
                                int r_early = 130);

/// Runs the model over the test windows in inference mode (batch-norm uses
/// running statistics) and scores one prediction per test unit.
EvalReport evaluate(Model& model, const WindowBatch& test, int r_early = 130);

}  // namespace rulkit
