#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "rulkit/tensor.hpp"

namespace rulkit {

/// One row of a CMAPSS-format file: unit id, cycle, 3 operational settings
/// and 21 sensor readings (26 whitespace-separated numeric columns).
struct RawRecord {
  int unit_id = 0;
  int cycle = 0;
  std::array<double, 3> settings{};
  std::array<double, 21> sensors{};
};

/// Parses a CMAPSS text file. Rows are grouped by unit and ordered by cycle;
/// within each unit cycles must be consecutive starting at 1. Malformed rows
/// raise a parse error naming the source and line.
std::vector<RawRecord> parse_cmapss(const std::filesystem::path& path);
std::vector<RawRecord> parse_cmapss(std::istream& in, const std::string& source);

enum class Subset { FD001, FD003 };

Subset subset_from_string(const std::string& name);
const char* to_string(Subset subset);

/// 1-based sensor indices with no learnable pattern in the subset; these and
/// setting 3 are dropped by select_features.
const std::vector<int>& dropped_sensors(Subset subset);

/// Tabular view of the selected feature columns. The cycle column doubles as
/// a model input (it is part of the subset's input count) while unit ids stay
/// metadata only.
struct FeatureFrame {
  std::vector<std::string> columns;
  std::vector<int> unit_ids;   // per row
  std::vector<int> cycles;     // per row
  std::vector<double> values;  // row-major, rows x columns
  bool scaled = false;

  std::size_t rows() const { return unit_ids.size(); }
  std::size_t n_columns() const { return columns.size(); }
  double at(std::size_t row, std::size_t col) const {
    return values[row * columns.size() + col];
  }

  struct UnitSpan {
    int unit_id;
    std::size_t first_row;
    std::size_t length;
  };
  /// Units in ascending id order with their contiguous row ranges.
  std::vector<UnitSpan> units() const;
};

/// Keeps cycle, settings 1-2 and the informative sensors for the subset:
/// 17 feature columns for FD001, 19 for FD003.
FeatureFrame select_features(const std::vector<RawRecord>& records, Subset subset);

struct MinMaxScaler {
  std::vector<double> col_min, col_max;
  bool fitted = false;
};

/// Fits per-column minima and maxima. Fit on training rows only.
MinMaxScaler fit_minmax(const FeatureFrame& frame);

/// x' = (x - min) / (max - min); constant columns map to 0. Values outside
/// the fitted range pass through the same affine map, so test data may leave
/// [0, 1]. Applying an unfitted scaler is a state error.
FeatureFrame apply_minmax(const FeatureFrame& frame, const MinMaxScaler& scaler);

/// Piecewise RUL target per row: min(last_cycle - cycle, r_early). Assumes
/// every unit in the frame runs to failure at its last cycle.
std::vector<double> piecewise_rul(const FeatureFrame& frame, int r_early = 130);

/// A batch of fixed-length windows with scalar targets.
struct WindowBatch {
  Tensor windows;  // [count x seq_len x signals]
  Tensor targets;  // [count]
  std::vector<int> unit_ids;

  std::size_t count() const { return windows.defined() ? windows.shape()[0] : 0; }
  std::size_t seq_len() const { return windows.shape()[1]; }
  std::size_t signals() const { return windows.shape()[2]; }
};

/// All complete windows of seq_l consecutive cycles per unit; a unit of
/// length L contributes max(0, L - seq_l + 1) windows, each labelled with
/// the target at its final cycle. Units shorter than seq_l are skipped.
WindowBatch generate_windows(const FeatureFrame& frame, std::size_t seq_l,
                             const std::vector<double>& targets);

/// One integer RUL per line, one line per test unit in unit order.
std::vector<int> parse_rul_truth(const std::filesystem::path& path);

/// One window per test unit: its last seq_l cycles, left-padded by repeating
/// the first row when the unit is shorter. Targets are the truth values
/// capped at r_early.
WindowBatch test_windows(const FeatureFrame& frame, const std::vector<int>& rul_truth,
                         std::size_t seq_l, int r_early = 130);

struct ColumnStats {
  std::string name;
  double mean = 0.0;
  double variance = 0.0;  // population variance
  double min = 0.0;
  double max = 0.0;
};

std::vector<ColumnStats> column_stats(const FeatureFrame& frame);

void write_frame_csv(const FeatureFrame& frame, const std::filesystem::path& path);
void write_stats_csv(const std::vector<ColumnStats>& stats, const std::filesystem::path& path);

}  // namespace rulkit
