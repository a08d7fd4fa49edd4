#include "rulkit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace rulkit {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

double parse_double(std::string_view token, const std::string& source, std::size_t line_no) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.begin(), token.end(), value);
  if (ec != std::errc() || ptr != token.end() || !std::isfinite(value)) {
    throw ParseError(source + ":" + std::to_string(line_no) + ": token '" +
                     std::string(token) + "' is not a finite number");
  }
  return value;
}

void format_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  out += buf;
}

}  // namespace

std::vector<RawRecord> parse_cmapss(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return parse_cmapss(in, path.filename().string());
}

std::vector<RawRecord> parse_cmapss(std::istream& in, const std::string& source) {
  std::vector<RawRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 26) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 26 columns, got " +
                       std::to_string(tokens.size()));
    }
    RawRecord record;
    record.unit_id = static_cast<int>(parse_double(tokens[0], source, line_no));
    record.cycle = static_cast<int>(parse_double(tokens[1], source, line_no));
    if (record.unit_id <= 0 || record.cycle <= 0) {
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": unit and cycle must be positive integers");
    }
    for (int i = 0; i < 3; ++i) record.settings[i] = parse_double(tokens[2 + i], source, line_no);
    for (int i = 0; i < 21; ++i) record.sensors[i] = parse_double(tokens[5 + i], source, line_no);
    records.push_back(record);
  }

  std::stable_sort(records.begin(), records.end(), [](const RawRecord& a, const RawRecord& b) {
    return a.unit_id != b.unit_id ? a.unit_id < b.unit_id : a.cycle < b.cycle;
  });

  // cycles must be 1..L per unit once ordered
  int current_unit = -1;
  int expected_cycle = 1;
  for (const RawRecord& r : records) {
    if (r.unit_id != current_unit) {
      current_unit = r.unit_id;
      expected_cycle = 1;
    }
    if (r.cycle != expected_cycle) {
      throw DataError(source + ": unit " + std::to_string(r.unit_id) +
                      " has non-consecutive cycles near cycle " + std::to_string(r.cycle));
    }
    ++expected_cycle;
  }
  return records;
}

Subset subset_from_string(const std::string& name) {
  if (name == "FD001" || name == "fd001") return Subset::FD001;
  if (name == "FD003" || name == "fd003") return Subset::FD003;
  throw ConfigError("unknown subset '" + name + "' (supported: FD001, FD003)");
}

const char* to_string(Subset subset) {
  return subset == Subset::FD001 ? "FD001" : "FD003";
}

const std::vector<int>& dropped_sensors(Subset subset) {
  static const std::vector<int> fd001{1, 5, 6, 10, 16, 18, 19};
  static const std::vector<int> fd003{1, 5, 16, 18, 19};
  return subset == Subset::FD001 ? fd001 : fd003;
}

std::vector<FeatureFrame::UnitSpan> FeatureFrame::units() const {
  std::vector<UnitSpan> spans;
  std::size_t row = 0;
  while (row < rows()) {
    UnitSpan span;
    span.unit_id = unit_ids[row];
    span.first_row = row;
    while (row < rows() && unit_ids[row] == span.unit_id) ++row;
    span.length = row - span.first_row;
    spans.push_back(span);
  }
  return spans;
}

FeatureFrame select_features(const std::vector<RawRecord>& records, Subset subset) {
  const std::vector<int>& dropped = dropped_sensors(subset);
  std::vector<int> kept_sensors;
  for (int s = 1; s <= 21; ++s) {
    if (std::find(dropped.begin(), dropped.end(), s) == dropped.end())
      kept_sensors.push_back(s);
  }

  FeatureFrame frame;
  frame.columns.push_back("cycle");
  frame.columns.push_back("setting_1");
  frame.columns.push_back("setting_2");
  for (int s : kept_sensors) frame.columns.push_back("s_" + std::to_string(s));

  frame.unit_ids.reserve(records.size());
  frame.cycles.reserve(records.size());
  frame.values.reserve(records.size() * frame.columns.size());
  for (const RawRecord& r : records) {
    frame.unit_ids.push_back(r.unit_id);
    frame.cycles.push_back(r.cycle);
    frame.values.push_back(static_cast<double>(r.cycle));
    frame.values.push_back(r.settings[0]);
    frame.values.push_back(r.settings[1]);
    for (int s : kept_sensors) frame.values.push_back(r.sensors[s - 1]);
  }
  return frame;
}

MinMaxScaler fit_minmax(const FeatureFrame& frame) {
  if (frame.rows() == 0) throw ContractError("fit_minmax on an empty frame");
  MinMaxScaler scaler;
  const std::size_t cols = frame.n_columns();
  scaler.col_min.assign(cols, 0.0);
  scaler.col_max.assign(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = frame.at(0, c), hi = frame.at(0, c);
    for (std::size_t r = 1; r < frame.rows(); ++r) {
      lo = std::min(lo, frame.at(r, c));
      hi = std::max(hi, frame.at(r, c));
    }
    scaler.col_min[c] = lo;
    scaler.col_max[c] = hi;
  }
  scaler.fitted = true;
  return scaler;
}

FeatureFrame apply_minmax(const FeatureFrame& frame, const MinMaxScaler& scaler) {
  if (!scaler.fitted) throw StateError("apply_minmax called before fit_minmax");
  if (scaler.col_min.size() != frame.n_columns()) {
    throw DimensionError("scaler fitted on " + std::to_string(scaler.col_min.size()) +
                         " columns, frame has " + std::to_string(frame.n_columns()));
  }
  FeatureFrame scaled = frame;
  const std::size_t cols = frame.n_columns();
  for (std::size_t c = 0; c < cols; ++c) {
    const double lo = scaler.col_min[c];
    const double range = scaler.col_max[c] - lo;
    for (std::size_t r = 0; r < frame.rows(); ++r) {
      double& v = scaled.values[r * cols + c];
      v = range == 0.0 ? 0.0 : (v - lo) / range;
    }
  }
  scaled.scaled = true;
  return scaled;
}

std::vector<double> piecewise_rul(const FeatureFrame& frame, int r_early) {
  std::vector<double> targets(frame.rows(), 0.0);
  for (const auto& span : frame.units()) {
    const int last_cycle = frame.cycles[span.first_row + span.length - 1];
    for (std::size_t i = 0; i < span.length; ++i) {
      const int raw = last_cycle - frame.cycles[span.first_row + i];
      targets[span.first_row + i] = static_cast<double>(std::min(raw, r_early));
    }
  }
  return targets;
}

WindowBatch generate_windows(const FeatureFrame& frame, std::size_t seq_l,
                             const std::vector<double>& targets) {
  if (seq_l == 0) throw ConfigError("window length must be positive");
  if (targets.size() != frame.rows()) {
    throw ContractError("targets per row: " + std::to_string(targets.size()) + " for " +
                        std::to_string(frame.rows()) + " rows");
  }
  const std::size_t signals = frame.n_columns();
  std::size_t total = 0;
  for (const auto& span : frame.units())
    if (span.length >= seq_l) total += span.length - seq_l + 1;
  if (total == 0) {
    throw DataError("no unit is long enough for windows of length " + std::to_string(seq_l));
  }

  std::vector<double> windows(total * seq_l * signals);
  std::vector<double> window_targets(total);
  std::vector<int> unit_ids(total);
  std::size_t w = 0;
  for (const auto& span : frame.units()) {
    if (span.length < seq_l) continue;
    for (std::size_t start = 0; start + seq_l <= span.length; ++start) {
      const std::size_t row0 = span.first_row + start;
      std::copy(frame.values.begin() + row0 * signals,
                frame.values.begin() + (row0 + seq_l) * signals,
                windows.begin() + w * seq_l * signals);
      window_targets[w] = targets[row0 + seq_l - 1];
      unit_ids[w] = span.unit_id;
      ++w;
    }
  }

  WindowBatch batch;
  batch.windows = Tensor::from_data({total, seq_l, signals}, std::move(windows));
  batch.targets = Tensor::from_data({total}, std::move(window_targets));
  batch.unit_ids = std::move(unit_ids);
  return batch;
}

std::vector<int> parse_rul_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<int> truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 1) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                       ": expected one value per line");
    }
    const double v = parse_double(tokens[0], path.filename().string(), line_no);
    if (v < 0.0) {
      throw DataError(path.filename().string() + ":" + std::to_string(line_no) +
                      ": negative RUL");
    }
    truth.push_back(static_cast<int>(v));
  }
  return truth;
}

WindowBatch test_windows(const FeatureFrame& frame, const std::vector<int>& rul_truth,
                         std::size_t seq_l, int r_early) {
  if (seq_l == 0) throw ConfigError("window length must be positive");
  const auto spans = frame.units();
  if (spans.size() != rul_truth.size()) {
    throw DataError("truth file has " + std::to_string(rul_truth.size()) + " entries for " +
                    std::to_string(spans.size()) + " test units");
  }
  const std::size_t signals = frame.n_columns();
  std::vector<double> windows(spans.size() * seq_l * signals);
  std::vector<double> targets(spans.size());
  std::vector<int> unit_ids(spans.size());

  for (std::size_t u = 0; u < spans.size(); ++u) {
    const auto& span = spans[u];
    for (std::size_t t = 0; t < seq_l; ++t) {
      // left-pad short units by repeating their first row
      const std::size_t offset =
          span.length >= seq_l ? span.length - seq_l + t
                               : (t + span.length >= seq_l ? t + span.length - seq_l : 0);
      const std::size_t row = span.first_row + offset;
      std::copy(frame.values.begin() + row * signals, frame.values.begin() + (row + 1) * signals,
                windows.begin() + (u * seq_l + t) * signals);
    }
    targets[u] = static_cast<double>(std::min(rul_truth[u], r_early));
    unit_ids[u] = span.unit_id;
  }

  WindowBatch batch;
  batch.windows = Tensor::from_data({spans.size(), seq_l, signals}, std::move(windows));
  batch.targets = Tensor::from_data({spans.size()}, std::move(targets));
  batch.unit_ids = std::move(unit_ids);
  return batch;
}

std::vector<ColumnStats> column_stats(const FeatureFrame& frame) {
  std::vector<ColumnStats> stats;
  const std::size_t n = frame.rows();
  if (n == 0) return stats;
  for (std::size_t c = 0; c < frame.n_columns(); ++c) {
    ColumnStats s;
    s.name = frame.columns[c];
    s.min = s.max = frame.at(0, c);
    double sum = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double v = frame.at(r, c);
      sum += v;
      s.min = std::min(s.min, v);
      s.max = std::max(s.max, v);
    }
    s.mean = sum / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = frame.at(r, c) - s.mean;
      acc += d * d;
    }
    s.variance = acc / static_cast<double>(n);
    stats.push_back(std::move(s));
  }
  return stats;
}

void write_frame_csv(const FeatureFrame& frame, const std::filesystem::path& path) {
  std::string out = "unit_id,cycle";
  for (const auto& c : frame.columns) out += "," + c;
  out += "\n";
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out += std::to_string(frame.unit_ids[r]);
    out += ",";
    out += std::to_string(frame.cycles[r]);
    for (std::size_t c = 0; c < frame.n_columns(); ++c) {
      out += ",";
      format_double(out, frame.at(r, c));
    }
    out += "\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  file << out;
}

void write_stats_csv(const std::vector<ColumnStats>& stats, const std::filesystem::path& path) {
  std::string out = "column,mean,variance,min,max\n";
  for (const auto& s : stats) {
    out += s.name;
    for (double v : {s.mean, s.variance, s.min, s.max}) {
      out += ",";
      format_double(out, v);
    }
    out += "\n";
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  file << out;
}

}  // namespace rulkit
