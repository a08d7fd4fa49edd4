#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rulkit/data.hpp"
#include "rulkit/metrics.hpp"
#include "rulkit/model.hpp"
#include "rulkit/synth.hpp"
#include "rulkit/trainer.hpp"

namespace rulkit {

/// One experiment: dataset subset, architecture, training budget, repeats.
/// model.n_signals == 0 derives the signal count from the subset's selected
/// feature columns (17 for FD001, 19 for FD003).
struct ExperimentConfig {
  Subset subset = Subset::FD001;
  std::filesystem::path data_dir = "data";
  std::filesystem::path output_dir = "runs/experiment";
  ModelSpec model;
  TrainConfig train;
  std::size_t repeats = 1;
  int r_early = 130;
};

/// Loads a config document (JSON), applying defaults for absent keys.
/// Unknown keys and invalid values are all collected into one config error.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source);

/// The config with every default resolved, serialized as JSON. Re-running
/// from this document reproduces the run.
std::string effective_config_json(const ExperimentConfig& config);

/// Violations across the whole config; empty means runnable.
std::vector<std::string> validate_experiment_config(const ExperimentConfig& config);

/// Stable digest of the effective config (FNV-1a, hex).
std::string config_digest(const ExperimentConfig& config);

struct RepeatResult {
  EvalReport report;
  TrainHistory history;
};

struct ExperimentResult {
  ExperimentConfig config;  // effective
  std::string label;
  std::vector<RepeatResult> repeats;
  EvalReport mean_report;  // metrics averaged over repeats
  EvalReport best_report;  // lowest-rmse repeat
  FeatureFrame test_frame;  // scaled, for prediction series
  std::vector<int> rul_truth;
  std::optional<Model> best_model;
};

/// Full pipeline: parse, select, scale, label, window, then per repeat
/// (seeds seed, seed+1, ...) build, train, evaluate. Writes the effective
/// config, per-seed histories and unit predictions, deterministic report
/// tables and a separate timing table into output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

enum class TableFormat { csv, markdown };

TableFormat table_format_from_string(const std::string& name);

/// One row per report in input order. Timing is opt-in so the default table
/// is byte-identical across reruns with the same config and seed.
void emit_table(std::span<const EvalReport> reports, TableFormat format,
                const std::filesystem::path& path, bool with_timing = false);

/// Per-unit prediction series as CSV (cycle, true_rul, predicted_rul) plus a
/// small SVG rendering. The true series follows the capped piecewise shape.
/// With dense = false only the protocol prediction at the unit's last cycle
/// is emitted; dense = true scores a window ending at every cycle.
void emit_predictions(const ExperimentResult& result, std::span<const int> unit_ids,
                      const std::filesystem::path& dir, bool dense);

/// One grid cell: architecture family, head mode, optional attention.
struct GridCell {
  HeadType family = HeadType::fnn;
  HeadMode mode = HeadMode::multi_head;
  std::optional<AttentionConfig> attention;
  std::string name() const;
};

/// The default comparison grid: every family single- and multi-head without
/// attention, plus multi-head soft- and hard-multiplicative variants.
std::vector<GridCell> default_grid();

/// Grid cells from a config document's optional "grid" section
/// ({"families": [...], "modes": [...], "attention": ["none", "soft_<kind>",
/// "hard_<kind>", ...]}); the default grid when the section is absent.
std::vector<GridCell> load_grid_cells(const std::filesystem::path& path);

/// Runs every cell with the base config's data and training budget; each
/// cell writes into its own subdirectory and a combined table is produced
/// at the grid root.
std::vector<ExperimentResult> run_grid(const ExperimentConfig& base,
                                       std::span<const GridCell> cells);

}  // namespace rulkit
