// Exercises the installed command line surface end to end: subcommands,
// config loading, flag overrides and the documented exit codes.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "rulkit/rng.hpp"
#include "rulkit/synth.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rulkit_cli_" + std::to_string(rulkit::Rng(std::random_device{}()).next()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int run(const std::string& args) {
  const std::string command = std::string(RULKIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

const fs::path& corpus() {
  static TempDir dir;
  static bool built = false;
  if (!built) {
    rulkit::SynthConfig config;
    config.train_units = 6;
    config.test_units = 4;
    synthesize_cmapss(config, dir.path);
    built = true;
  }
  return dir.path;
}

std::string common_flags(const fs::path& out) {
  return " --data-dir " + corpus().string() + " --output-dir " + out.string() +
         " --window-length 30 --epochs 1 --batch-size 64";
}

}  // namespace

TEST_CASE("cli: train completes and writes artifacts") {
  TempDir out;
  CHECK(run("train" + common_flags(out.path / "t")) == 0);
  CHECK(fs::exists(out.path / "t" / "report.csv"));
  CHECK(fs::exists(out.path / "t" / "effective_config.json"));
}

TEST_CASE("cli: ingest emits statistics") {
  TempDir out;
  CHECK(run("ingest --data-dir " + corpus().string() + " --output-dir " +
            (out.path / "i").string() + " --frames") == 0);
  CHECK(fs::exists(out.path / "i" / "train_stats.csv"));
  CHECK(fs::exists(out.path / "i" / "test_frame.csv"));
}

TEST_CASE("cli: predict writes unit series") {
  TempDir out;
  CHECK(run("predict" + common_flags(out.path / "p") + " --units 1") == 0);
  CHECK(fs::exists(out.path / "p" / "predictions" / "unit_1.csv"));
  CHECK(fs::exists(out.path / "p" / "predictions" / "unit_1.svg"));
}

TEST_CASE("cli: report merges run tables") {
  TempDir out;
  REQUIRE(run("train" + common_flags(out.path / "a")) == 0);
  REQUIRE(run("train" + common_flags(out.path / "b") + " --mode single_head") == 0);
  CHECK(run("report " + (out.path / "a").string() + " " + (out.path / "b").string() +
            " --format markdown --out " + (out.path / "merged.md").string()) == 0);
  CHECK(fs::exists(out.path / "merged.md"));
}

TEST_CASE("cli: grid runs configured cells") {
  TempDir out;
  std::ofstream config(out.path / "grid.json");
  config << R"({
    "data_dir": ")" << corpus().string() << R"(",
    "output_dir": ")" << (out.path / "g").string() << R"(",
    "model": {"window_length": 30, "layer_sizes": [8, 4], "trunk_sizes": [8]},
    "train": {"epochs": 1, "batch_size": 64},
    "grid": {"families": ["fnn"], "modes": ["single_head", "multi_head"],
             "attention": ["none"]}
  })";
  config.close();
  CHECK(run("grid --config " + (out.path / "grid.json").string()) == 0);
  CHECK(fs::exists(out.path / "g" / "grid_report.csv"));
  CHECK(fs::exists(out.path / "g" / "fnn_multi_head" / "report.csv"));
}

TEST_CASE("cli: config files override defaults and flags override configs") {
  TempDir out;
  std::ofstream config(out.path / "exp.json");
  config << R"({
    "data_dir": ")" << corpus().string() << R"(",
    "output_dir": ")" << (out.path / "c").string() << R"(",
    "model": {"head_type": "fnn", "window_length": 30},
    "train": {"epochs": 1, "batch_size": 64}
  })";
  config.close();
  CHECK(run("train --config " + (out.path / "exp.json").string() + " --epochs 1") == 0);
  CHECK(fs::exists(out.path / "c" / "report.csv"));
}

TEST_CASE("cli: exit codes carry the error category") {
  TempDir out;
  // config error (unknown subset name)
  CHECK(run("train --subset FD009" + common_flags(out.path / "x")) == 2);
  // parse error (malformed config document)
  std::ofstream bad(out.path / "bad.json");
  bad << "{not json";
  bad.close();
  CHECK(run("train --config " + (out.path / "bad.json").string()) == 3);
  // io error (missing data, synthesis disabled)
  CHECK(run("train --no-synth-fallback --data-dir " + (out.path / "empty").string() +
            " --output-dir " + (out.path / "y").string()) == 9);
  // data error (nonexistent unit requested)
  CHECK(run("predict" + common_flags(out.path / "z") + " --units 424242") == 4);
}

TEST_CASE("cli: missing data triggers the synthetic fallback") {
  TempDir out;
  const fs::path data = out.path / "fresh";
  fs::create_directories(data);
  CHECK(run("train --data-dir " + data.string() + " --output-dir " +
            (out.path / "s").string() +
            " --window-length 30 --epochs 1 --batch-size 64") == 0);
  CHECK(rulkit::cmapss_files_present(data / "synthetic", rulkit::Subset::FD001));
}

TEST_CASE("cli: synth tool writes a corpus") {
  TempDir out;
  const std::string command = std::string(RULKIT_SYNTH_PATH) + " --out-dir " +
                              (out.path / "gen").string() +
                              " --train-units 3 --test-units 2 >/dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(command.c_str())) == 0);
  CHECK(rulkit::cmapss_files_present(out.path / "gen", rulkit::Subset::FD001));
}
