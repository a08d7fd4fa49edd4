// rulkit: config-driven RUL experiments on CMAPSS-format data.
//
// Subcommands: ingest (parse + per-column statistics), train (one
// experiment), grid (cartesian experiment set), report (merge result
// tables), predict (per-unit prediction series).

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rulkit/experiment.hpp"

namespace fs = std::filesystem;
using namespace rulkit;

namespace {

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::config: return 2;
    case ErrorCategory::parse: return 3;
    case ErrorCategory::data: return 4;
    case ErrorCategory::dimension: return 5;
    case ErrorCategory::contract: return 6;
    case ErrorCategory::numeric: return 7;
    case ErrorCategory::state: return 8;
    case ErrorCategory::io: return 9;
  }
  return 1;
}

struct CommonOptions {
  std::string config_path;
  std::string subset;
  std::string data_dir;
  std::string output_dir;
  std::string head_type;
  std::string mode;
  std::string attention;        // none | soft | hard
  std::string attention_score;  // score kind for the attention layer
  std::int64_t epochs = -1;
  std::int64_t batch_size = -1;
  std::int64_t repeats = -1;
  std::int64_t window_length = -1;
  std::int64_t seed = -1;
  double learning_rate = -1.0;
  bool no_synth_fallback = false;
};

void add_common_options(CLI::App* cmd, CommonOptions& options) {
  cmd->add_option("-c,--config", options.config_path, "experiment config (JSON)");
  cmd->add_option("--subset", options.subset, "FD001 or FD003");
  cmd->add_option("--data-dir", options.data_dir, "directory with CMAPSS files");
  cmd->add_option("--output-dir", options.output_dir, "artifact directory");
  cmd->add_option("--head-type", options.head_type,
                  "fnn|srnn|gru|lstm|bilstm|cnn|cnlstm|san");
  cmd->add_option("--mode", options.mode, "single_head or multi_head");
  cmd->add_option("--attention", options.attention,
                  "none, soft or hard (adds an attention layer per head)");
  cmd->add_option("--attention-score", options.attention_score,
                  "score kind for --attention (default multiplicative)");
  cmd->add_option("--epochs", options.epochs, "training epochs");
  cmd->add_option("--batch-size", options.batch_size, "mini-batch size");
  cmd->add_option("--repeats", options.repeats, "seeds per experiment");
  cmd->add_option("--window-length", options.window_length, "cycles per window");
  cmd->add_option("--seed", options.seed, "base seed");
  cmd->add_option("--learning-rate", options.learning_rate, "adaptive-moment step size");
  cmd->add_flag("--no-synth-fallback", options.no_synth_fallback,
                "fail instead of synthesizing data when files are missing");
}

ExperimentConfig resolve_config(const CommonOptions& options) {
  ExperimentConfig config;
  if (!options.config_path.empty()) config = load_experiment_config(options.config_path);
  if (!options.subset.empty()) config.subset = subset_from_string(options.subset);
  if (!options.data_dir.empty()) config.data_dir = options.data_dir;
  if (!options.output_dir.empty()) config.output_dir = options.output_dir;
  if (!options.head_type.empty())
    config.model.head.head_type = head_type_from_string(options.head_type);
  if (!options.mode.empty()) config.model.mode = head_mode_from_string(options.mode);
  if (!options.attention.empty()) {
    if (options.attention == "none") {
      config.model.head.attention.reset();
    } else {
      AttentionConfig attention = config.model.head.attention.value_or(AttentionConfig{});
      attention.mode = attention_mode_from_string(options.attention);
      attention.score_kind = options.attention_score.empty()
                                 ? ScoreKind::multiplicative
                                 : score_kind_from_string(options.attention_score);
      config.model.head.attention = attention;
    }
  } else if (!options.attention_score.empty()) {
    AttentionConfig attention = config.model.head.attention.value_or(AttentionConfig{});
    attention.score_kind = score_kind_from_string(options.attention_score);
    config.model.head.attention = attention;
  }
  if (options.epochs >= 0) config.train.epochs = static_cast<std::size_t>(options.epochs);
  if (options.batch_size >= 0)
    config.train.batch_size = static_cast<std::size_t>(options.batch_size);
  if (options.repeats >= 0) config.repeats = static_cast<std::size_t>(options.repeats);
  if (options.window_length >= 0)
    config.model.window_length = static_cast<std::size_t>(options.window_length);
  if (options.seed >= 0) config.train.seed = static_cast<std::uint64_t>(options.seed);
  if (options.learning_rate >= 0.0) config.train.learning_rate = options.learning_rate;

  const bool conv_head = config.model.head.head_type == HeadType::cnn ||
                         config.model.head.head_type == HeadType::cnlstm;
  if (conv_head && !config.model.head.conv) config.model.head.conv = ConvSpec{};
  if (!conv_head) config.model.head.conv.reset();
  return config;
}

void resolve_data(ExperimentConfig& config, bool allow_synth) {
  if (cmapss_files_present(config.data_dir, config.subset)) return;
  if (!allow_synth) {
    throw IoError("missing CMAPSS files for " + std::string(to_string(config.subset)) +
                  " in '" + config.data_dir.string() + "'");
  }
  const fs::path fallback = config.data_dir / "synthetic";
  config.data_dir = ensure_cmapss_data(config.data_dir, config.subset, fallback);
  std::cerr << "note: real CMAPSS files not found; using the synthesized corpus in '"
            << fallback.string() << "'\n";
}

int run_ingest(const CommonOptions& options, bool dump_frames) {
  ExperimentConfig config = resolve_config(options);
  resolve_data(config, !options.no_synth_fallback);
  fs::create_directories(config.output_dir);

  for (const char* role : {"train", "test"}) {
    const fs::path path = std::string(role) == "train"
                              ? train_file(config.data_dir, config.subset)
                              : test_file(config.data_dir, config.subset);
    const auto records = parse_cmapss(path);
    const FeatureFrame frame = select_features(records, config.subset);
    write_stats_csv(column_stats(frame),
                    config.output_dir / (std::string(role) + "_stats.csv"));
    if (dump_frames)
      write_frame_csv(frame, config.output_dir / (std::string(role) + "_frame.csv"));
    std::cout << role << ": " << frame.units().size() << " units, " << frame.rows()
              << " rows, " << frame.n_columns() << " feature columns\n";
  }
  std::cout << "statistics written to " << config.output_dir.string() << "\n";
  return 0;
}

int run_train(const CommonOptions& options) {
  ExperimentConfig config = resolve_config(options);
  resolve_data(config, !options.no_synth_fallback);
  ExperimentResult result = run_experiment(config);
  std::cout << "label:      " << result.label << "\n";
  for (const RepeatResult& rr : result.repeats) {
    std::cout << "seed " << rr.report.seed << ": rmse " << rr.report.rmse << "  score "
              << rr.report.score << "\n";
  }
  std::cout << "mean:  rmse " << result.mean_report.rmse << "  score "
            << result.mean_report.score << "\n";
  std::cout << "best:  rmse " << result.best_report.rmse << "  score "
            << result.best_report.score << " (seed " << result.best_report.seed << ")\n";
  std::cout << "parameters: " << result.best_report.param_count << "\n";
  std::cout << "artifacts:  " << config.output_dir.string() << "\n";
  return 0;
}

int run_grid_command(const CommonOptions& options) {
  ExperimentConfig base = resolve_config(options);
  resolve_data(base, !options.no_synth_fallback);
  std::vector<GridCell> cells = options.config_path.empty()
                                    ? default_grid()
                                    : load_grid_cells(options.config_path);
  const auto results = run_grid(base, cells);
  std::cout << results.size() << " grid cells finished; combined table at "
            << (base.output_dir / "grid_report.csv").string() << "\n";
  return 0;
}

std::vector<EvalReport> read_report_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<EvalReport> reports;
  std::string line;
  std::getline(in, line);  // header
  const bool timed = line.find("wall_time_s") != std::string::npos;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    EvalReport report;
    std::getline(ss, report.label, ',');
    std::getline(ss, cell, ',');
    report.seed = std::stoull(cell);
    std::getline(ss, cell, ',');
    report.rmse = std::stod(cell);
    std::getline(ss, cell, ',');
    report.score = std::stod(cell);
    std::getline(ss, cell, ',');
    report.param_count = std::stoull(cell);
    if (timed) {
      std::getline(ss, cell, ',');
      report.wall_time_s = std::stod(cell);
    }
    std::getline(ss, report.spec_digest, ',');
    reports.push_back(std::move(report));
  }
  if (reports.empty()) throw DataError("'" + path.string() + "' holds no report rows");
  return reports;
}

int run_report(const std::vector<std::string>& inputs, const std::string& format_name,
               const std::string& out_path) {
  std::vector<EvalReport> merged;
  for (const std::string& input : inputs) {
    fs::path path = input;
    if (fs::is_directory(path)) path /= "report.csv";
    const auto rows = read_report_csv(path);
    merged.insert(merged.end(), rows.begin(), rows.end());
  }
  const TableFormat format = table_format_from_string(format_name);
  emit_table(merged, format, out_path);
  std::cout << merged.size() << " rows written to " << out_path << "\n";
  return 0;
}

int run_predict(const CommonOptions& options, const std::vector<int>& units, bool dense) {
  ExperimentConfig config = resolve_config(options);
  resolve_data(config, !options.no_synth_fallback);
  ExperimentResult result = run_experiment(config);
  std::vector<int> requested = units;
  if (requested.empty()) {
    // default to the first two test units
    const auto spans = result.test_frame.units();
    for (std::size_t i = 0; i < spans.size() && i < 2; ++i)
      requested.push_back(spans[i].unit_id);
  }
  const fs::path dir = config.output_dir / "predictions";
  emit_predictions(result, requested, dir, dense);
  std::cout << requested.size() << " unit series written to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RUL experiment toolkit for CMAPSS-format turbofan data"};
  app.require_subcommand(1);

  CommonOptions options;
  bool dump_frames = false;
  std::vector<int> units;
  bool dense = false;
  std::vector<std::string> report_inputs;
  std::string report_format = "csv";
  std::string report_out = "report_merged.csv";

  CLI::App* ingest = app.add_subcommand("ingest", "parse data and emit per-column statistics");
  add_common_options(ingest, options);
  ingest->add_flag("--frames", dump_frames, "also dump the processed feature frames");

  CLI::App* train_cmd = app.add_subcommand("train", "run one experiment");
  add_common_options(train_cmd, options);

  CLI::App* grid = app.add_subcommand("grid", "run a set of experiments");
  add_common_options(grid, options);

  CLI::App* report = app.add_subcommand("report", "merge run tables into one");
  report->add_option("inputs", report_inputs, "run directories or report.csv files")
      ->required();
  report->add_option("--format", report_format, "csv or markdown");
  report->add_option("--out", report_out, "output path");

  CLI::App* predict = app.add_subcommand("predict", "emit per-unit prediction series");
  add_common_options(predict, options);
  predict->add_option("--units", units, "test unit ids (default: first two)")
      ->delimiter(',');
  predict->add_flag("--dense", dense, "score a window at every cycle for plot density");

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return run_ingest(options, dump_frames);
    if (train_cmd->parsed()) return run_train(options);
    if (grid->parsed()) return run_grid_command(options);
    if (report->parsed()) return run_report(report_inputs, report_format, report_out);
    if (predict->parsed()) return run_predict(options, units, dense);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
