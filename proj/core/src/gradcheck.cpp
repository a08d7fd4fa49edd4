#include "rulkit/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace rulkit {

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  std::span<Tensor> params, double step, double tol) {
  if (step <= 0.0) throw ContractError("finite_diff_check needs step > 0");

  // analytic pass
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    for (Tensor& p : params) p.zero_grad();
    Tensor loss = f();
    tape.backward(loss);
    for (Tensor& p : params) {
      auto g = p.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }

  GradCheckReport report;
  report.tol = tol;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    auto values = p.values();
    GradCheckReport::ParamResult result;
    result.name = p.name().empty() ? "param" + std::to_string(pi) : p.name();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + step;
      const double plus = f().item();
      values[i] = saved - step;
      const double minus = f().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_rel_err = std::max(result.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, result.max_rel_err);
    report.per_param.push_back(std::move(result));
  }
  report.passed = report.max_rel_err < tol;
  return report;
}

}  // namespace rulkit
