#include "rulkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "rulkit/rng.hpp"

namespace rulkit {

namespace {

struct SensorModel {
  double base;      // healthy reading
  double gain;      // total drift between healthy and failed
  double exponent;  // wear response shape
  double noise;     // measurement noise sigma
};

// Baselines follow the magnitudes of the real channels; drifting sensors get
// heterogeneous response exponents so the wear state is identifiable from a
// window. Sensors dropped by select_features stay exactly constant.
std::array<SensorModel, 21> sensor_models(Subset subset) {
  std::array<SensorModel, 21> models{};
  const auto flat = [](double base) { return SensorModel{base, 0.0, 1.0, 0.0}; };
  models[0] = flat(518.67);                           // s1
  models[1] = {642.30, 8.0, 1.0, 0.30};               // s2
  models[2] = {1586.50, 38.0, 1.4, 1.60};             // s3
  models[3] = {1399.20, 42.0, 1.8, 1.80};             // s4
  models[4] = flat(14.62);                            // s5
  models[5] = flat(21.61);                            // s6 (drifts in FD003)
  models[6] = {554.80, -9.5, 1.1, 0.35};              // s7
  models[7] = {2387.90, 2.4, 1.6, 0.12};              // s8
  models[8] = {9050.00, 28.0, 0.8, 1.40};             // s9
  models[9] = flat(1.30);                             // s10 (drifts in FD003)
  models[10] = {47.20, 3.1, 1.2, 0.14};               // s11
  models[11] = {521.80, -8.7, 0.9, 0.32};             // s12
  models[12] = {2388.00, 2.6, 1.9, 0.12};             // s13
  models[13] = {8130.00, 24.0, 2.3, 1.20};            // s14
  models[14] = {8.40, 0.45, 1.5, 0.020};              // s15
  models[15] = flat(0.03);                            // s16
  models[16] = {391.50, 9.5, 1.3, 0.45};              // s17
  models[17] = flat(2388.0);                          // s18
  models[18] = flat(100.0);                           // s19
  models[19] = {38.95, -1.9, 1.0, 0.085};             // s20
  models[20] = {23.37, -1.15, 1.1, 0.050};            // s21
  if (subset == Subset::FD003) {
    models[5] = {21.61, -1.3, 1.2, 0.060};            // s6
    models[9] = {1.30, 0.09, 1.6, 0.004};             // s10
  }
  return models;
}

struct UnitProfile {
  std::size_t life;
  double wear_exponent;  // wear(t) = w0 + (1 - w0) * (t / life)^wear_exponent
  double initial_wear;   // units start with varying degrees of wear
  std::array<double, 21> severity;  // per-unit, per-sensor response strength
  int fault_mode;        // FD003 has two degradation signatures
};

UnitProfile draw_unit(Rng& rng, Subset subset) {
  UnitProfile unit;
  unit.life = 128 + rng.bounded(120) + rng.bounded(41);  // 128 .. 287
  unit.wear_exponent = rng.uniform(1.1, 1.9);
  unit.initial_wear = rng.uniform(0.0, 0.12);
  // how strongly each sensor responds to wear varies from engine to engine,
  // so cross-sensor level patterns do not transfer between units
  for (double& s : unit.severity) s = rng.uniform(0.78, 1.22);
  unit.fault_mode = subset == Subset::FD003 ? static_cast<int>(rng.bounded(2)) : 0;
  return unit;
}

void append_row(std::string& out, int unit_id, int cycle, const UnitProfile& unit,
                const std::array<SensorModel, 21>& models, Rng& rng) {
  char buf[64];
  const double age = static_cast<double>(cycle) / static_cast<double>(unit.life);
  const double wear =
      unit.initial_wear + (1.0 - unit.initial_wear) * std::pow(age, unit.wear_exponent);

  std::snprintf(buf, sizeof(buf), "%d %d", unit_id, cycle);
  out += buf;
  const double settings[3] = {rng.uniform(-0.0086, 0.0086), rng.uniform(-0.0006, 0.0006),
                              100.0};
  for (double s : settings) {
    std::snprintf(buf, sizeof(buf), " %.4f", s);
    out += buf;
  }
  for (std::size_t s = 0; s < models.size(); ++s) {
    const SensorModel& m = models[s];
    double gain = m.gain * unit.severity[s];
    if (unit.fault_mode == 1) {
      // second fault signature: the fan-side channels respond more strongly
      if (s == 5 || s == 9 || s == 19 || s == 20) gain *= 1.9;
      if (s == 2 || s == 3) gain *= 0.55;
    }
    const double drift = gain * std::pow(wear, m.exponent);
    const double noise = m.noise > 0.0 ? 1.6 * m.noise * rng.normal() : 0.0;
    std::snprintf(buf, sizeof(buf), " %.4f", m.base + drift + noise);
    out += buf;
  }
  out += "\n";
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  file << content;
}

}  // namespace

std::filesystem::path train_file(const std::filesystem::path& dir, Subset subset) {
  return dir / ("train_" + std::string(to_string(subset)) + ".txt");
}

std::filesystem::path test_file(const std::filesystem::path& dir, Subset subset) {
  return dir / ("test_" + std::string(to_string(subset)) + ".txt");
}

std::filesystem::path truth_file(const std::filesystem::path& dir, Subset subset) {
  return dir / ("RUL_" + std::string(to_string(subset)) + ".txt");
}

bool cmapss_files_present(const std::filesystem::path& dir, Subset subset) {
  namespace fs = std::filesystem;
  return fs::exists(train_file(dir, subset)) && fs::exists(test_file(dir, subset)) &&
         fs::exists(truth_file(dir, subset));
}

void synthesize_cmapss(const SynthConfig& config, const std::filesystem::path& out_dir) {
  if (config.train_units == 0 || config.test_units == 0) {
    throw ConfigError("synthesis needs at least one train and one test unit");
  }
  std::filesystem::create_directories(out_dir);
  const auto models = sensor_models(config.subset);
  Rng rng(config.seed ^ (config.subset == Subset::FD001 ? 0x1ULL : 0x3ULL));

  std::string train;
  for (std::size_t u = 1; u <= config.train_units; ++u) {
    const UnitProfile unit = draw_unit(rng, config.subset);
    for (std::size_t cycle = 1; cycle <= unit.life; ++cycle)
      append_row(train, static_cast<int>(u), static_cast<int>(cycle), unit, models, rng);
  }
  write_text(train_file(out_dir, config.subset), train);

  std::string test;
  std::string truth;
  for (std::size_t u = 1; u <= config.test_units; ++u) {
    const UnitProfile unit = draw_unit(rng, config.subset);
    // truncate before failure; a few short histories exercise window padding
    const std::size_t true_rul =
        std::min<std::size_t>(unit.life - 20, 8 + rng.bounded(130));
    const std::size_t cut = unit.life - true_rul;
    for (std::size_t cycle = 1; cycle <= cut; ++cycle)
      append_row(test, static_cast<int>(u), static_cast<int>(cycle), unit, models, rng);
    truth += std::to_string(true_rul);
    truth += "\n";
  }
  write_text(test_file(out_dir, config.subset), test);
  write_text(truth_file(out_dir, config.subset), truth);
}

std::filesystem::path ensure_cmapss_data(const std::filesystem::path& dir, Subset subset,
                                         const std::filesystem::path& fallback_dir) {
  if (cmapss_files_present(dir, subset)) return dir;
  if (!cmapss_files_present(fallback_dir, subset)) {
    SynthConfig config;
    config.subset = subset;
    synthesize_cmapss(config, fallback_dir);
  }
  return fallback_dir;
}

}  // namespace rulkit
