#include "rulkit/experiment.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rulkit/svg.hpp"

namespace rulkit {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
}

void check_known_keys(const json& object, std::initializer_list<const char*> known,
                      const std::string& scope, std::vector<std::string>& violations) {
  for (const auto& [key, value] : object.items()) {
    if (std::find_if(known.begin(), known.end(),
                     [&](const char* k) { return key == k; }) == known.end()) {
      violations.push_back("unknown key '" + scope + key + "'");
    }
  }
}

AttentionConfig attention_from_json(const json& node, std::vector<std::string>& violations) {
  AttentionConfig config;
  check_known_keys(node, {"score_kind", "mode", "regularizer_weight"}, "model.attention.",
                   violations);
  try {
    if (node.contains("score_kind"))
      config.score_kind = score_kind_from_string(node["score_kind"].get<std::string>());
    if (node.contains("mode"))
      config.mode = attention_mode_from_string(node["mode"].get<std::string>());
  } catch (const ConfigError& e) {
    violations.push_back(e.what());
  }
  if (node.contains("regularizer_weight"))
    config.regularizer_weight = node["regularizer_weight"].get<double>();
  return config;
}

json attention_to_json(const AttentionConfig& config) {
  return json{{"score_kind", to_string(config.score_kind)},
              {"mode", to_string(config.mode)},
              {"regularizer_weight", config.regularizer_weight}};
}

std::string attention_suffix(const std::optional<AttentionConfig>& attention) {
  if (!attention) return "";
  return std::string("+") + to_string(attention->mode) + "_" + to_string(attention->score_kind);
}

std::string label_for(const ExperimentConfig& config) {
  return std::string(to_string(config.subset)) + "/" + to_string(config.model.mode) + "/" +
         to_string(config.model.head.head_type) + attention_suffix(config.model.head.attention);
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }

  std::vector<std::string> violations;
  ExperimentConfig config;
  try {
    check_known_keys(doc, {"subset", "data_dir", "output_dir", "repeats", "r_early", "model",
                           "train", "grid"},
                     "", violations);
    if (doc.contains("subset")) config.subset = subset_from_string(doc["subset"].get<std::string>());
    if (doc.contains("data_dir")) config.data_dir = doc["data_dir"].get<std::string>();
    if (doc.contains("output_dir")) config.output_dir = doc["output_dir"].get<std::string>();
    if (doc.contains("repeats")) config.repeats = doc["repeats"].get<std::size_t>();
    if (doc.contains("r_early")) config.r_early = doc["r_early"].get<int>();

    if (doc.contains("model")) {
      const json& m = doc["model"];
      check_known_keys(m, {"mode", "head_type", "layer_sizes", "trunk_sizes", "window_length",
                           "n_signals", "seed", "conv", "attention"},
                       "model.", violations);
      if (m.contains("mode"))
        config.model.mode = head_mode_from_string(m["mode"].get<std::string>());
      if (m.contains("head_type"))
        config.model.head.head_type = head_type_from_string(m["head_type"].get<std::string>());
      if (m.contains("layer_sizes"))
        config.model.head.layer_sizes = m["layer_sizes"].get<std::vector<std::size_t>>();
      if (m.contains("trunk_sizes"))
        config.model.trunk_sizes = m["trunk_sizes"].get<std::vector<std::size_t>>();
      if (m.contains("window_length"))
        config.model.window_length = m["window_length"].get<std::size_t>();
      if (m.contains("n_signals")) config.model.n_signals = m["n_signals"].get<std::size_t>();
      if (m.contains("conv")) {
        const json& c = m["conv"];
        check_known_keys(c, {"kernel_width", "channels", "stride", "padding"}, "model.conv.",
                         violations);
        ConvSpec conv;
        if (c.contains("kernel_width")) conv.kernel_width = c["kernel_width"].get<std::size_t>();
        if (c.contains("channels")) conv.channels = c["channels"].get<std::size_t>();
        if (c.contains("stride")) conv.stride = c["stride"].get<std::size_t>();
        if (c.contains("padding")) {
          const std::string p = c["padding"].get<std::string>();
          if (p == "same") conv.padding = Padding::same;
          else if (p == "none") conv.padding = Padding::none;
          else violations.push_back("unknown conv padding '" + p + "'");
        }
        config.model.head.conv = conv;
      }
      if (m.contains("attention") && !m["attention"].is_null()) {
        config.model.head.attention = attention_from_json(m["attention"], violations);
      }
    }
    if (doc.contains("train")) {
      const json& t = doc["train"];
      check_known_keys(t, {"epochs", "batch_size", "learning_rate", "seed",
                           "regularizer_weight", "shuffle", "holdout_fraction"},
                       "train.", violations);
      if (t.contains("epochs")) config.train.epochs = t["epochs"].get<std::size_t>();
      if (t.contains("batch_size")) config.train.batch_size = t["batch_size"].get<std::size_t>();
      if (t.contains("learning_rate")) config.train.learning_rate = t["learning_rate"].get<double>();
      if (t.contains("seed")) config.train.seed = t["seed"].get<std::uint64_t>();
      if (t.contains("regularizer_weight"))
        config.train.regularizer_weight = t["regularizer_weight"].get<double>();
      if (t.contains("shuffle")) config.train.shuffle = t["shuffle"].get<bool>();
      if (t.contains("holdout_fraction"))
        config.train.holdout_fraction = t["holdout_fraction"].get<double>();
    }
  } catch (const ConfigError& e) {
    violations.push_back(e.what());
  } catch (const json::exception& e) {
    violations.push_back(source + ": " + e.what());
  }

  // defaults for conv heads so a bare head_type is runnable
  const bool conv_head = config.model.head.head_type == HeadType::cnn ||
                         config.model.head.head_type == HeadType::cnlstm;
  if (conv_head && !config.model.head.conv) config.model.head.conv = ConvSpec{};

  if (!violations.empty()) {
    std::string message = source + " is invalid:";
    for (const auto& v : violations) message += "\n  - " + v;
    throw ConfigError(message);
  }
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  return parse_experiment_config(read_text(path), path.string());
}

std::string effective_config_json(const ExperimentConfig& config) {
  json model{{"mode", to_string(config.model.mode)},
             {"head_type", to_string(config.model.head.head_type)},
             {"layer_sizes", config.model.head.layer_sizes},
             {"trunk_sizes", config.model.trunk_sizes},
             {"window_length", config.model.window_length},
             {"n_signals", config.model.n_signals},
             {"seed", config.model.seed}};
  if (config.model.head.conv) {
    model["conv"] = json{{"kernel_width", config.model.head.conv->kernel_width},
                         {"channels", config.model.head.conv->channels},
                         {"stride", config.model.head.conv->stride},
                         {"padding", config.model.head.conv->padding == Padding::same
                                         ? "same"
                                         : "none"}};
  }
  if (config.model.head.attention) {
    model["attention"] = attention_to_json(*config.model.head.attention);
  }
  json doc{{"subset", to_string(config.subset)},
           {"data_dir", config.data_dir.string()},
           {"output_dir", config.output_dir.string()},
           {"repeats", config.repeats},
           {"r_early", config.r_early},
           {"model", model},
           {"train", json{{"epochs", config.train.epochs},
                          {"batch_size", config.train.batch_size},
                          {"learning_rate", config.train.learning_rate},
                          {"seed", config.train.seed},
                          {"regularizer_weight", config.train.regularizer_weight},
                          {"shuffle", config.train.shuffle},
                          {"holdout_fraction", config.train.holdout_fraction}}}};
  return doc.dump(2) + "\n";
}

std::vector<std::string> validate_experiment_config(const ExperimentConfig& config) {
  // n_signals == 0 means "derive from the subset's selected columns"
  ModelSpec spec = config.model;
  if (spec.n_signals == 0) spec.n_signals = config.subset == Subset::FD001 ? 17 : 19;
  std::vector<std::string> violations = validate_model_spec(spec);
  if (config.repeats == 0) violations.push_back("repeats must be positive");
  if (config.r_early <= 0) violations.push_back("r_early must be positive");
  if (config.train.epochs == 0) violations.push_back("train.epochs must be positive");
  if (config.train.batch_size < 2) violations.push_back("train.batch_size must be at least 2");
  if (config.train.learning_rate < 0.0)
    violations.push_back("train.learning_rate must be non-negative");
  if (config.train.holdout_fraction < 0.0 || config.train.holdout_fraction >= 1.0)
    violations.push_back("train.holdout_fraction must be in [0, 1)");
  if (config.train.regularizer_weight < 0.0)
    violations.push_back("train.regularizer_weight must be non-negative");
  return violations;
}

std::string config_digest(const ExperimentConfig& config) {
  // the digest identifies the experiment itself, not where it ran
  ExperimentConfig canonical = config;
  canonical.data_dir.clear();
  canonical.output_dir.clear();
  const std::string text = effective_config_json(canonical);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

TableFormat table_format_from_string(const std::string& name) {
  if (name == "csv") return TableFormat::csv;
  if (name == "markdown" || name == "md") return TableFormat::markdown;
  throw ConfigError("unknown table format '" + name + "'");
}

void emit_table(std::span<const EvalReport> reports, TableFormat format,
                const std::filesystem::path& path, bool with_timing) {
  if (reports.empty()) throw ContractError("emit_table needs at least one report");
  std::string out;
  if (format == TableFormat::csv) {
    out += EvalReport::csv_header(with_timing) + "\n";
    for (const EvalReport& r : reports) out += r.csv_row(with_timing) + "\n";
  } else {
    out += "| model | seed | RMSE | Score | parameters |";
    if (with_timing) out += " wall_time_s |";
    out += "\n|---|---|---|---|---|";
    if (with_timing) out += "---|";
    out += "\n";
    for (const EvalReport& r : reports) {
      out += "| " + r.label + " | " + std::to_string(r.seed) + " | " +
             format_fixed(r.rmse, 4) + " | " + format_fixed(r.score, 4) + " | " +
             std::to_string(r.param_count) + " |";
      if (with_timing) out += " " + format_fixed(r.wall_time_s, 3) + " |";
      out += "\n";
    }
  }
  write_text(path, out);
}

ExperimentResult run_experiment(const ExperimentConfig& raw_config) {
  ExperimentConfig config = raw_config;
  {
    auto violations = validate_experiment_config(config);
    if (!violations.empty()) {
      std::string message = "experiment config is invalid:";
      for (const auto& v : violations) message += "\n  - " + v;
      throw ConfigError(message);
    }
  }
  if (!cmapss_files_present(config.data_dir, config.subset)) {
    throw IoError("missing CMAPSS files for " + std::string(to_string(config.subset)) +
                  " in '" + config.data_dir.string() + "'");
  }

  // pipeline: parse -> select -> fit/apply minmax -> piecewise targets -> windows
  const auto train_records = parse_cmapss(train_file(config.data_dir, config.subset));
  const auto test_records = parse_cmapss(test_file(config.data_dir, config.subset));
  FeatureFrame train_frame = select_features(train_records, config.subset);
  FeatureFrame test_frame = select_features(test_records, config.subset);

  if (config.model.head.layer_sizes.empty()) {
    config.model.head.layer_sizes = default_layer_sizes(config.model.head.head_type);
  }
  if (config.model.n_signals == 0) {
    config.model.n_signals = train_frame.n_columns();
  } else if (config.model.n_signals != train_frame.n_columns()) {
    throw ConfigError("model.n_signals = " + std::to_string(config.model.n_signals) +
                      " but " + to_string(config.subset) + " selection yields " +
                      std::to_string(train_frame.n_columns()) + " feature columns");
  }

  const MinMaxScaler scaler = fit_minmax(train_frame);
  train_frame = apply_minmax(train_frame, scaler);
  test_frame = apply_minmax(test_frame, scaler);

  const std::vector<double> targets = piecewise_rul(train_frame, config.r_early);
  const WindowBatch train_batch =
      generate_windows(train_frame, config.model.window_length, targets);
  const std::vector<int> truth = parse_rul_truth(truth_file(config.data_dir, config.subset));
  const WindowBatch test_batch =
      test_windows(test_frame, truth, config.model.window_length, config.r_early);

  std::filesystem::create_directories(config.output_dir);
  write_text(config.output_dir / "effective_config.json", effective_config_json(config));

  ExperimentResult result;
  result.label = label_for(config);
  const std::string digest = config_digest(config);

  for (std::size_t repeat = 0; repeat < config.repeats; ++repeat) {
    const std::uint64_t seed = config.train.seed + repeat;
    ModelSpec model_spec = config.model;
    model_spec.seed = seed;
    TrainConfig train_config = config.train;
    train_config.seed = seed;

    const auto start = std::chrono::steady_clock::now();
    Model model = build_model(model_spec);
    RepeatResult rr;
    rr.history = train(model, train_batch, train_config);
    rr.report = evaluate(model, test_batch, config.r_early);
    rr.report.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rr.report.label = result.label;
    rr.report.seed = seed;
    rr.report.spec_digest = digest;

    write_history_csv(rr.history,
                      config.output_dir / ("history_seed" + std::to_string(seed) + ".csv"));

    std::string per_unit = "unit_id,true_rul,predicted_rul,error\n";
    for (const UnitPrediction& u : rr.report.per_unit) {
      per_unit += std::to_string(u.unit_id) + "," + format_fixed(u.true_rul, 4) + "," +
                  format_fixed(u.predicted_rul, 4) + "," + format_fixed(u.error, 4) + "\n";
    }
    write_text(config.output_dir / ("per_unit_seed" + std::to_string(seed) + ".csv"), per_unit);

    if (!result.best_model ||
        rr.report.rmse < result.best_report.rmse) {
      result.best_model = model;
      result.best_report = rr.report;
    }
    result.repeats.push_back(std::move(rr));
  }

  result.config = config;
  result.test_frame = test_frame;
  result.rul_truth = truth;

  result.mean_report.label = result.label + "/mean";
  result.mean_report.seed = config.train.seed;
  result.mean_report.spec_digest = digest;
  result.mean_report.param_count = result.repeats.front().report.param_count;
  for (const RepeatResult& rr : result.repeats) {
    result.mean_report.rmse += rr.report.rmse;
    result.mean_report.score += rr.report.score;
    result.mean_report.wall_time_s += rr.report.wall_time_s;
  }
  const double n = static_cast<double>(result.repeats.size());
  result.mean_report.rmse /= n;
  result.mean_report.score /= n;

  std::vector<EvalReport> rows;
  for (const RepeatResult& rr : result.repeats) rows.push_back(rr.report);
  rows.push_back(result.mean_report);
  EvalReport best_row = result.best_report;
  best_row.label = result.label + "/best";
  rows.push_back(best_row);

  emit_table(rows, TableFormat::csv, config.output_dir / "report.csv");
  emit_table(rows, TableFormat::markdown, config.output_dir / "report.md");
  emit_table(rows, TableFormat::csv, config.output_dir / "report_timed.csv", true);

  std::string summary;
  for (const RepeatResult& rr : result.repeats) summary += rr.report.text() + "\n";
  write_text(config.output_dir / "summary.txt", summary);
  return result;
}

void emit_predictions(const ExperimentResult& result, std::span<const int> unit_ids,
                      const std::filesystem::path& dir, bool dense) {
  if (!result.best_model) throw StateError("emit_predictions needs a completed experiment");
  Model model = *result.best_model;
  const auto spans = result.test_frame.units();
  const std::size_t seq_l = result.config.model.window_length;
  const std::size_t signals = result.test_frame.n_columns();
  const int r_early = result.config.r_early;
  std::filesystem::create_directories(dir);

  for (int unit_id : unit_ids) {
    const auto span_it = std::find_if(spans.begin(), spans.end(), [&](const auto& s) {
      return s.unit_id == unit_id;
    });
    if (span_it == spans.end()) {
      throw DataError("unit " + std::to_string(unit_id) + " is not in the test set");
    }
    const std::size_t unit_index = static_cast<std::size_t>(span_it - spans.begin());
    const int truth_rul = result.rul_truth[unit_index];
    const std::size_t length = span_it->length;

    auto true_rul_at = [&](std::size_t cycle1) {
      const double raw = static_cast<double>(truth_rul) +
                         static_cast<double>(length) - static_cast<double>(cycle1);
      return std::min(raw, static_cast<double>(r_early));
    };
    auto predict_at = [&](std::size_t end_cycle1) {
      // window of the last seq_l cycles ending here, first row repeated when short
      std::vector<double> window(seq_l * signals);
      for (std::size_t t = 0; t < seq_l; ++t) {
        const std::size_t offset =
            t + end_cycle1 >= seq_l ? std::min(t + end_cycle1 - seq_l, length - 1) : 0;
        const std::size_t row = span_it->first_row + offset;
        std::copy(result.test_frame.values.begin() + row * signals,
                  result.test_frame.values.begin() + (row + 1) * signals,
                  window.begin() + t * signals);
      }
      Tensor batch = Tensor::from_data({1, seq_l, signals}, std::move(window));
      const double raw = model.forward(batch, false).output.item();
      return std::clamp(raw, 0.0, static_cast<double>(r_early));
    };

    std::string csv = "cycle,true_rul,predicted_rul\n";
    ChartSeries true_series{"true RUL", {}};
    ChartSeries pred_series{dense ? "predicted (all cycles)" : "predicted (final cycle)", {}};
    for (std::size_t c = 1; c <= length; ++c) {
      const double truth_c = true_rul_at(c);
      true_series.points.push_back({static_cast<double>(c), truth_c});
      if (dense || c == length) {
        const double pred = predict_at(c);
        pred_series.points.push_back({static_cast<double>(c), pred});
        csv += std::to_string(c) + "," + format_fixed(truth_c, 4) + "," +
               format_fixed(pred, 4) + "\n";
      } else {
        csv += std::to_string(c) + "," + format_fixed(truth_c, 4) + ",\n";
      }
    }
    const std::string stem = "unit_" + std::to_string(unit_id);
    write_text(dir / (stem + ".csv"), csv);
    write_line_chart_svg(dir / (stem + ".svg"),
                         result.label + " unit " + std::to_string(unit_id),
                         {true_series, pred_series});
  }
}

std::string GridCell::name() const {
  return std::string(to_string(family)) + "_" + to_string(mode) + attention_suffix(attention);
}

std::vector<GridCell> default_grid() {
  std::vector<GridCell> cells;
  const HeadType families[] = {HeadType::fnn, HeadType::srnn, HeadType::gru, HeadType::lstm,
                               HeadType::bilstm, HeadType::cnn, HeadType::cnlstm, HeadType::san};
  AttentionConfig soft_mul;
  soft_mul.score_kind = ScoreKind::multiplicative;
  soft_mul.mode = AttentionMode::soft;
  AttentionConfig hard_mul = soft_mul;
  hard_mul.mode = AttentionMode::hard;
  for (HeadType family : families) {
    cells.push_back({family, HeadMode::single_head, std::nullopt});
    cells.push_back({family, HeadMode::multi_head, std::nullopt});
    if (family != HeadType::san) {
      cells.push_back({family, HeadMode::multi_head, soft_mul});
      cells.push_back({family, HeadMode::multi_head, hard_mul});
    }
  }
  return cells;
}

std::vector<GridCell> load_grid_cells(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (!doc.contains("grid")) return default_grid();

  const json& grid = doc["grid"];
  std::vector<std::string> violations;
  check_known_keys(grid, {"families", "modes", "attention"}, "grid.", violations);

  std::vector<HeadType> families;
  std::vector<HeadMode> modes;
  std::vector<std::optional<AttentionConfig>> variants;
  try {
    if (grid.contains("families")) {
      for (const auto& name : grid["families"])
        families.push_back(head_type_from_string(name.get<std::string>()));
    }
    if (grid.contains("modes")) {
      for (const auto& name : grid["modes"])
        modes.push_back(head_mode_from_string(name.get<std::string>()));
    }
    if (grid.contains("attention")) {
      for (const auto& entry : grid["attention"]) {
        const std::string name = entry.get<std::string>();
        if (name == "none") {
          variants.push_back(std::nullopt);
        } else {
          const auto split = name.find('_');
          if (split == std::string::npos) {
            violations.push_back("attention variant '" + name +
                                 "' is not none or <soft|hard>_<score_kind>");
            continue;
          }
          AttentionConfig config;
          config.mode = attention_mode_from_string(name.substr(0, split));
          config.score_kind = score_kind_from_string(name.substr(split + 1));
          variants.push_back(config);
        }
      }
    }
  } catch (const ConfigError& e) {
    violations.push_back(e.what());
  }
  if (!violations.empty()) {
    std::string message = path.string() + " grid section is invalid:";
    for (const auto& v : violations) message += "\n  - " + v;
    throw ConfigError(message);
  }

  if (families.empty())
    families = {HeadType::fnn, HeadType::srnn, HeadType::gru, HeadType::lstm,
                HeadType::bilstm, HeadType::cnn, HeadType::cnlstm, HeadType::san};
  if (modes.empty()) modes = {HeadMode::single_head, HeadMode::multi_head};
  if (variants.empty()) variants = {std::nullopt};

  std::vector<GridCell> cells;
  for (HeadType family : families)
    for (HeadMode mode : modes)
      for (const auto& attention : variants) cells.push_back({family, mode, attention});
  return cells;
}

std::vector<ExperimentResult> run_grid(const ExperimentConfig& base,
                                       std::span<const GridCell> cells) {
  if (cells.empty()) throw ContractError("the grid needs at least one cell");
  std::vector<ExperimentResult> results;
  std::vector<EvalReport> combined;
  for (const GridCell& cell : cells) {
    ExperimentConfig config = base;
    config.model.head.head_type = cell.family;
    config.model.mode = cell.mode;
    config.model.head.attention = cell.attention;
    const bool conv_head = cell.family == HeadType::cnn || cell.family == HeadType::cnlstm;
    if (conv_head && !config.model.head.conv) config.model.head.conv = ConvSpec{};
    if (!conv_head) config.model.head.conv.reset();
    config.output_dir = base.output_dir / cell.name();
    results.push_back(run_experiment(config));
    combined.push_back(results.back().mean_report);
  }
  emit_table(combined, TableFormat::csv, base.output_dir / "grid_report.csv");
  emit_table(combined, TableFormat::markdown, base.output_dir / "grid_report.md");
  emit_table(combined, TableFormat::csv, base.output_dir / "grid_report_timed.csv", true);
  return results;
}

}  // namespace rulkit
