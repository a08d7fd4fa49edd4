#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "rulkit/experiment.hpp"
#include "rulkit/rng.hpp"

using namespace rulkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rulkit_exp_" + std::to_string(Rng(std::random_device{}()).next()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// one shared tiny corpus per test binary run
const fs::path& tiny_corpus() {
  static TempDir dir;
  static bool built = false;
  if (!built) {
    SynthConfig config;
    config.train_units = 6;
    config.test_units = 4;
    synthesize_cmapss(config, dir.path);
    built = true;
  }
  return dir.path;
}

ExperimentConfig tiny_experiment(const fs::path& out) {
  ExperimentConfig config;
  config.subset = Subset::FD001;
  config.data_dir = tiny_corpus();
  config.output_dir = out;
  config.model.head.head_type = HeadType::fnn;
  config.model.head.layer_sizes = {8, 4};
  config.model.trunk_sizes = {8};
  config.model.window_length = 30;
  config.train.epochs = 2;
  config.train.batch_size = 64;
  config.train.seed = 3;
  config.repeats = 1;
  return config;
}

}  // namespace

TEST_CASE("config documents parse with defaults and reject unknown keys") {
  ExperimentConfig config = parse_experiment_config(R"({
    "subset": "FD003",
    "repeats": 2,
    "model": {"head_type": "lstm", "layer_sizes": [16]},
    "train": {"epochs": 5, "learning_rate": 0.01}
  })", "inline");
  CHECK(config.subset == Subset::FD003);
  CHECK(config.repeats == 2);
  CHECK(config.model.head.head_type == HeadType::lstm);
  CHECK(config.model.head.layer_sizes == std::vector<std::size_t>{16});
  CHECK(config.train.epochs == 5);
  CHECK(config.train.learning_rate == doctest::Approx(0.01));
  CHECK(config.model.window_length == 90);  // default
  CHECK(config.r_early == 130);             // default

  CHECK_THROWS_WITH_AS(
      parse_experiment_config(R"({"epochz": 3})", "inline"),
      doctest::Contains("epochz"), ConfigError);
  CHECK_THROWS_AS(parse_experiment_config("{nope", "inline"), ParseError);
}

TEST_CASE("config validation lists every violation at once") {
  ExperimentConfig config;
  config.repeats = 0;
  config.r_early = -1;
  config.train.batch_size = 1;
  config.model.n_signals = 17;
  config.model.head.layer_sizes = {8, 0};
  auto violations = validate_experiment_config(config);
  CHECK(violations.size() >= 4);
}

TEST_CASE("effective config round-trips through parse with a stable digest") {
  ExperimentConfig config = tiny_experiment("unused");
  config.model.n_signals = 17;
  const std::string text = effective_config_json(config);
  ExperimentConfig reparsed = parse_experiment_config(text, "effective");
  CHECK(config_digest(reparsed) == config_digest(config));
  CHECK(effective_config_json(reparsed) == text);
}

TEST_CASE("a smoke experiment completes and writes its artifacts") {
  TempDir out;
  ExperimentConfig config = tiny_experiment(out.path / "run");
  ExperimentResult result = run_experiment(config);

  REQUIRE(result.repeats.size() == 1);
  const EvalReport& report = result.repeats.front().report;
  CHECK(std::isfinite(report.rmse));
  CHECK(std::isfinite(report.score));
  CHECK(report.param_count > 0);
  CHECK(report.per_unit.size() == 4);
  CHECK(result.config.model.n_signals == 17);

  for (const char* name : {"effective_config.json", "report.csv", "report.md",
                           "report_timed.csv", "history_seed3.csv", "per_unit_seed3.csv",
                           "summary.txt"}) {
    CHECK_MESSAGE(fs::exists(out.path / "run" / name), name);
  }
}

TEST_CASE("identical configs give byte-identical deterministic artifacts") {
  TempDir out;
  ExperimentConfig config_a = tiny_experiment(out.path / "a");
  ExperimentConfig config_b = tiny_experiment(out.path / "b");
  ExperimentResult ra = run_experiment(config_a);
  ExperimentResult rb = run_experiment(config_b);

  CHECK(ra.repeats.front().report.rmse == rb.repeats.front().report.rmse);
  CHECK(ra.repeats.front().report.score == rb.repeats.front().report.score);

  for (const char* name : {"report.csv", "report.md", "history_seed3.csv",
                           "per_unit_seed3.csv"}) {
    CHECK_MESSAGE(slurp(out.path / "a" / name) == slurp(out.path / "b" / name), name);
  }
  // the effective configs differ only in output_dir
  CHECK(slurp(out.path / "a" / "effective_config.json") !=
        slurp(out.path / "b" / "effective_config.json"));
}

TEST_CASE("re-running from the written effective config reproduces the outputs") {
  TempDir out;
  ExperimentConfig config = tiny_experiment(out.path / "orig");
  run_experiment(config);

  ExperimentConfig replay =
      load_experiment_config(out.path / "orig" / "effective_config.json");
  replay.output_dir = out.path / "replay";
  run_experiment(replay);

  CHECK(slurp(out.path / "orig" / "report.csv") == slurp(out.path / "replay" / "report.csv"));
  CHECK(slurp(out.path / "orig" / "history_seed3.csv") ==
        slurp(out.path / "replay" / "history_seed3.csv"));
}

TEST_CASE("a signal-count mismatch is a config error") {
  TempDir out;
  ExperimentConfig config = tiny_experiment(out.path / "run");
  config.model.n_signals = 19;  // the FD003 count against FD001 files
  CHECK_THROWS_WITH_AS(run_experiment(config), doctest::Contains("17"), ConfigError);
}

TEST_CASE("missing data files are an io error") {
  TempDir out;
  ExperimentConfig config = tiny_experiment(out.path / "run");
  config.data_dir = out.path / "nothing_here";
  CHECK_THROWS_AS(run_experiment(config), IoError);
}

TEST_CASE("emit_table writes one row per report in order") {
  TempDir out;
  EvalReport first;
  first.label = "a";
  first.rmse = 1.23456789;
  first.score = 10.0;
  first.param_count = 5;
  first.spec_digest = "d1";
  EvalReport second = first;
  second.label = "b";
  second.rmse = 2.5;

  std::vector<EvalReport> one{first};
  emit_table(one, TableFormat::csv, out.path / "one.csv");
  const std::string text = slurp(out.path / "one.csv");
  CHECK(text.find(EvalReport::csv_header(false)) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);

  std::vector<EvalReport> two{first, second};
  emit_table(two, TableFormat::csv, out.path / "two.csv");
  const std::string both = slurp(out.path / "two.csv");
  CHECK(both.find("a,") < both.find("b,"));

  std::vector<EvalReport> none;
  CHECK_THROWS_AS(emit_table(none, TableFormat::csv, out.path / "none.csv"), ContractError);
}

TEST_CASE("markdown tables round-trip numerically against the csv") {
  TempDir out;
  Rng rng(71);
  std::vector<EvalReport> reports;
  for (int i = 0; i < 3; ++i) {
    EvalReport report;
    report.label = "model" + std::to_string(i);
    report.rmse = rng.uniform(5.0, 30.0);
    report.score = rng.uniform(20.0, 900.0);
    report.param_count = 1000 + i;
    report.spec_digest = "x";
    reports.push_back(report);
  }
  emit_table(reports, TableFormat::csv, out.path / "t.csv");
  emit_table(reports, TableFormat::markdown, out.path / "t.md");

  // parse both emissions and compare at 4 decimal places
  std::ifstream csv(out.path / "t.csv");
  std::string line;
  std::getline(csv, line);  // header
  std::vector<std::pair<double, double>> csv_rows;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');  // label
    std::getline(ss, cell, ',');  // seed
    std::getline(ss, cell, ',');
    const double r = std::stod(cell);
    std::getline(ss, cell, ',');
    const double s = std::stod(cell);
    csv_rows.push_back({r, s});
  }

  std::ifstream md(out.path / "t.md");
  std::getline(md, line);
  std::getline(md, line);  // header + separator
  std::size_t row = 0;
  while (std::getline(md, line)) {
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, '|');  // leading empty
    std::getline(ss, cell, '|');  // label
    std::getline(ss, cell, '|');  // seed
    std::getline(ss, cell, '|');
    const double r = std::stod(cell);
    std::getline(ss, cell, '|');
    const double s = std::stod(cell);
    REQUIRE(row < csv_rows.size());
    CHECK(std::abs(r - csv_rows[row].first) < 1e-4);
    CHECK(std::abs(s - csv_rows[row].second) < 1e-4);
    ++row;
  }
  CHECK(row == csv_rows.size());
}

TEST_CASE("prediction series follow the capped piecewise truth") {
  TempDir out;
  ExperimentConfig config = tiny_experiment(out.path / "run");
  ExperimentResult result = run_experiment(config);

  const int unit = result.test_frame.units().front().unit_id;
  const std::size_t length = result.test_frame.units().front().length;
  const int truth = result.rul_truth.front();
  std::vector<int> units{unit};
  emit_predictions(result, units, out.path / "pred", false);

  const fs::path csv_path = out.path / "pred" / ("unit_" + std::to_string(unit) + ".csv");
  REQUIRE(fs::exists(csv_path));
  CHECK(fs::exists(out.path / "pred" / ("unit_" + std::to_string(unit) + ".svg")));

  std::ifstream csv(csv_path);
  std::string line;
  std::getline(csv, line);
  CHECK(line == "cycle,true_rul,predicted_rul");
  std::getline(csv, line);  // cycle 1
  std::stringstream ss(line);
  std::string cell;
  std::getline(ss, cell, ',');
  CHECK(cell == "1");
  std::getline(ss, cell, ',');
  const double expected = std::min<double>(truth + static_cast<double>(length) - 1.0, 130.0);
  CHECK(std::stod(cell) == doctest::Approx(expected));

  // only the final cycle carries a prediction in sparse mode
  std::size_t predicted_rows = 0, total_rows = 1;
  while (std::getline(csv, line)) {
    ++total_rows;
    if (line.back() != ',') ++predicted_rows;
  }
  CHECK(total_rows == length);
  CHECK(predicted_rows == 1);

  std::vector<int> missing{99999};
  CHECK_THROWS_AS(emit_predictions(result, missing, out.path / "pred", false), DataError);
}

TEST_CASE("dense prediction series score every cycle") {
  TempDir out;
  ExperimentConfig config = tiny_experiment(out.path / "run");
  config.train.epochs = 1;
  ExperimentResult result = run_experiment(config);
  const int unit = result.test_frame.units().front().unit_id;
  const std::size_t length = result.test_frame.units().front().length;
  std::vector<int> units{unit};
  emit_predictions(result, units, out.path / "dense", true);

  std::ifstream csv(out.path / "dense" / ("unit_" + std::to_string(unit) + ".csv"));
  std::string line;
  std::getline(csv, line);
  std::size_t predicted_rows = 0;
  while (std::getline(csv, line)) {
    if (line.back() != ',') ++predicted_rows;
  }
  CHECK(predicted_rows == length);
}

TEST_CASE("grid runs write per-cell directories and a combined table") {
  TempDir out;
  ExperimentConfig base = tiny_experiment(out.path / "grid");
  base.train.epochs = 1;
  std::vector<GridCell> cells;
  cells.push_back({HeadType::fnn, HeadMode::single_head, std::nullopt});
  cells.push_back({HeadType::fnn, HeadMode::multi_head, std::nullopt});
  auto results = run_grid(base, cells);
  REQUIRE(results.size() == 2);
  CHECK(fs::exists(out.path / "grid" / "fnn_single_head" / "report.csv"));
  CHECK(fs::exists(out.path / "grid" / "fnn_multi_head" / "report.csv"));
  const std::string combined = slurp(out.path / "grid" / "grid_report.csv");
  CHECK(combined.find("single_head/fnn") != std::string::npos);
  CHECK(combined.find("multi_head/fnn") != std::string::npos);
}

TEST_CASE("the default grid covers the standard comparison protocol") {
  auto cells = default_grid();
  // 8 families x (single, multi) + 7 families x (soft, hard) multiplicative
  CHECK(cells.size() == 8 * 2 + 7 * 2);
  std::size_t with_attention = 0;
  for (const auto& cell : cells) {
    if (cell.attention) {
      ++with_attention;
      CHECK(cell.attention->score_kind == ScoreKind::multiplicative);
      CHECK(cell.mode == HeadMode::multi_head);
    }
  }
  CHECK(with_attention == 14);
}
