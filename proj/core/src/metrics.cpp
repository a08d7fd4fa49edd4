#include "rulkit/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "rulkit/model.hpp"

namespace rulkit {

namespace {

void check_paired(std::span<const double> pred, std::span<const double> truth,
                  const char* op) {
  if (pred.empty() || pred.size() != truth.size()) {
    throw ContractError(std::string(op) + " needs equal, nonzero-length inputs (got " +
                        std::to_string(pred.size()) + " and " + std::to_string(truth.size()) +
                        ")");
  }
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_paired(pred, truth, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(pred.size()));
}

double score(std::span<const double> pred, std::span<const double> truth) {
  check_paired(pred, truth, "score");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    acc += e < 0.0 ? std::exp(-e / 13.0) - 1.0 : std::exp(e / 10.0) - 1.0;
  }
  return acc;
}

std::string EvalReport::csv_header(bool with_timing) {
  std::string header = "label,seed,rmse,score,parameters";
  if (with_timing) header += ",wall_time_s";
  header += ",spec_digest";
  return header;
}

std::string EvalReport::csv_row(bool with_timing) const {
  std::string row = label;
  row += "," + std::to_string(seed);
  row += "," + format_fixed(rmse, 6);
  row += "," + format_fixed(score, 6);
  row += "," + std::to_string(param_count);
  if (with_timing) row += "," + format_fixed(wall_time_s, 3);
  row += "," + spec_digest;
  return row;
}

std::string EvalReport::text() const {
  std::string out;
  out += "experiment: " + label + "\n";
  out += "seed:       " + std::to_string(seed) + "\n";
  out += "rmse:       " + format_fixed(rmse, 4) + "\n";
  out += "score:      " + format_fixed(score, 4) + "\n";
  out += "parameters: " + std::to_string(param_count) + "\n";
  out += "wall_time_s:" + format_fixed(wall_time_s, 3) + "\n";
  out += "units:      " + std::to_string(per_unit.size()) + "\n";
  return out;
}

EvalReport evaluate_predictions(std::span<const double> raw_pred, const WindowBatch& test,
                                int r_early) {
  if (raw_pred.size() != test.count()) {
    throw ContractError("got " + std::to_string(raw_pred.size()) + " predictions for " +
                        std::to_string(test.count()) + " test windows");
  }
  EvalReport report;
  auto truths = test.targets.values();
  std::vector<double> clamped(raw_pred.size());
  for (std::size_t i = 0; i < raw_pred.size(); ++i) {
    clamped[i] = std::clamp(raw_pred[i], 0.0, static_cast<double>(r_early));
    UnitPrediction unit;
    unit.unit_id = test.unit_ids[i];
    unit.true_rul = truths[i];
    unit.predicted_rul = clamped[i];
    unit.error = clamped[i] - truths[i];
    report.per_unit.push_back(unit);
  }
  report.rmse = rmse(clamped, truths);
  report.score = score(clamped, truths);
  return report;
}

EvalReport evaluate(Model& model, const WindowBatch& test, int r_early) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t n = test.count();
  const std::size_t steps = test.seq_len();
  const std::size_t signals = test.signals();
  std::vector<double> predictions;
  predictions.reserve(n);

  // chunked inference keeps per-pass allocations bounded
  const std::size_t chunk = 256;
  auto values = test.windows.values();
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t count = std::min(chunk, n - begin);
    std::vector<double> slice(values.begin() + begin * steps * signals,
                              values.begin() + (begin + count) * steps * signals);
    Tensor batch = Tensor::from_data({count, steps, signals}, std::move(slice));
    Tensor out = model.forward(batch, false).output;
    for (std::size_t i = 0; i < count; ++i) predictions.push_back(out.at(i, 0));
  }

  EvalReport report = evaluate_predictions(predictions, test, r_early);
  report.param_count = count_params(model);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace rulkit
