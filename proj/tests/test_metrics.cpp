#include <doctest.h>

#include <cmath>
#include <vector>

#include "rulkit/metrics.hpp"
#include "rulkit/model.hpp"
#include "rulkit/rng.hpp"

using namespace rulkit;

namespace {

WindowBatch tiny_batch(std::vector<double> targets) {
  WindowBatch batch;
  const std::size_t n = targets.size();
  batch.windows = Tensor::zeros({n, 2, 2});
  batch.targets = Tensor::from_data({n}, std::move(targets));
  for (std::size_t i = 0; i < n; ++i) batch.unit_ids.push_back(static_cast<int>(i) + 1);
  return batch;
}

}  // namespace

TEST_CASE("rmse closed forms") {
  std::vector<double> truth{1.0, 2.0, 3.0};
  CHECK(rmse(truth, truth) == 0.0);

  std::vector<double> single_pred{3.0}, single_truth{0.0};
  CHECK(rmse(single_pred, single_truth) == doctest::Approx(3.0).epsilon(1e-15));

  std::vector<double> pred{1.0, 2.0}, zeros{0.0, 0.0};
  CHECK(std::abs(rmse(pred, zeros) - std::sqrt(2.5)) < 1e-12);

  std::vector<double> mismatched{1.0};
  CHECK_THROWS_AS(rmse(pred, mismatched), ContractError);
  std::vector<double> empty;
  CHECK_THROWS_AS(rmse(empty, empty), ContractError);
}

TEST_CASE("score closed forms under the documented sign convention") {
  std::vector<double> truth{50.0};
  std::vector<double> late{60.0};    // e = +10
  std::vector<double> early{37.0};   // e = -13
  const double unit_penalty = std::exp(1.0) - 1.0;
  CHECK(std::abs(score(late, truth) - unit_penalty) < 1e-12);
  CHECK(std::abs(score(early, truth) - unit_penalty) < 1e-12);
  CHECK(score(truth, truth) == 0.0);

  // late by d costs more than early by d
  std::vector<double> late13{63.0};
  CHECK(score(late13, truth) > score(early, truth));
  CHECK(std::abs(score(late13, truth) - (std::exp(1.3) - 1.0)) < 1e-12);

  std::vector<double> two_truth{50.0, 50.0};
  std::vector<double> two_pred{37.0, 60.0};
  CHECK(std::abs(score(two_pred, two_truth) - 2.0 * unit_penalty) < 1e-12);
}

TEST_CASE("score is asymmetric and increasing on both sides") {
  std::vector<double> truth{100.0};
  double previous_late = 0.0, previous_early = 0.0;
  for (int d = 1; d <= 50; ++d) {
    std::vector<double> late{100.0 + d}, early{100.0 - d};
    const double late_penalty = score(late, truth);
    const double early_penalty = score(early, truth);
    CHECK(late_penalty > early_penalty);
    CHECK(late_penalty > previous_late);
    CHECK(early_penalty > previous_early);
    previous_late = late_penalty;
    previous_early = early_penalty;
  }
}

TEST_CASE("both metrics are permutation invariant") {
  Rng rng(3);
  std::vector<double> pred(10), truth(10);
  for (std::size_t i = 0; i < 10; ++i) {
    truth[i] = rng.uniform(0.0, 130.0);
    pred[i] = truth[i] + rng.uniform(-20.0, 20.0);
  }
  const double base_rmse = rmse(pred, truth);
  const double base_score = score(pred, truth);
  std::vector<std::size_t> order(10);
  for (std::size_t i = 0; i < 10; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<double> pred2(10), truth2(10);
  for (std::size_t i = 0; i < 10; ++i) {
    pred2[i] = pred[order[i]];
    truth2[i] = truth[order[i]];
  }
  CHECK(rmse(pred2, truth2) == doctest::Approx(base_rmse).epsilon(1e-12));
  CHECK(score(pred2, truth2) == doctest::Approx(base_score).epsilon(1e-12));
}

TEST_CASE("evaluate_predictions clamps, pairs and fills the report") {
  WindowBatch batch = tiny_batch({30.0, 100.0, 130.0});

  // an oracle scores zero on both metrics
  std::vector<double> oracle{30.0, 100.0, 130.0};
  EvalReport perfect = evaluate_predictions(oracle, batch);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.score == 0.0);
  REQUIRE(perfect.per_unit.size() == 3);
  CHECK(perfect.per_unit[0].unit_id == 1);

  // raw outputs beyond the cap are clamped before scoring
  std::vector<double> wild{142.0, 100.0, 130.0};
  EvalReport clamped = evaluate_predictions(wild, batch);
  CHECK(clamped.per_unit[0].predicted_rul == 130.0);
  CHECK(clamped.per_unit[0].error == doctest::Approx(100.0));
  // a constant-130 predictor on a unit with truth 30 pays the explosive late penalty
  CHECK(clamped.score == doctest::Approx(std::exp(10.0) - 1.0).epsilon(1e-12));

  std::vector<double> short_pred{1.0};
  CHECK_THROWS_AS(evaluate_predictions(short_pred, batch), ContractError);
}

TEST_CASE("evaluate runs a model over test windows in inference mode") {
  ModelSpec spec;
  spec.mode = HeadMode::multi_head;
  spec.head.head_type = HeadType::fnn;
  spec.head.layer_sizes = {4};
  spec.trunk_sizes = {3};
  spec.n_signals = 2;
  spec.window_length = 2;
  Model model = build_model(spec);

  WindowBatch batch = tiny_batch({10.0, 20.0, 30.0});
  EvalReport report = evaluate(model, batch);
  CHECK(report.per_unit.size() == 3);
  CHECK(report.param_count == count_params(model));
  CHECK(std::isfinite(report.rmse));
  CHECK(std::isfinite(report.score));
  for (const auto& unit : report.per_unit) {
    CHECK(unit.predicted_rul >= 0.0);
    CHECK(unit.predicted_rul <= 130.0);
  }
}

TEST_CASE("report serialization carries the metric fields") {
  EvalReport report;
  report.label = "FD001/multi_head/fnn";
  report.rmse = 8.683;
  report.score = 28.4;
  report.param_count = 1234;
  report.seed = 42;
  report.spec_digest = "abc";
  const std::string row = report.csv_row(false);
  CHECK(row.find("FD001/multi_head/fnn") == 0);
  CHECK(row.find("8.683") != std::string::npos);
  CHECK(row.find("1234") != std::string::npos);
  CHECK(EvalReport::csv_header(true).find("wall_time_s") != std::string::npos);
  CHECK(EvalReport::csv_header(false).find("wall_time_s") == std::string::npos);
  CHECK(report.text().find("rmse") != std::string::npos);
}
