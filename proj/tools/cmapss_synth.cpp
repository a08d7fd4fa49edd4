// cmapss-synth: deterministic CMAPSS-format degradation corpus generator.
// Produces train/test/RUL files so the toolkit runs end to end without the
// original dataset; point it at an empty directory and go.

#include <CLI11.hpp>

#include <iostream>

#include "rulkit/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthesize a CMAPSS-format run-to-failure corpus"};

  std::string out_dir = "data/synthetic";
  std::string subset_name = "FD001";
  std::size_t train_units = 100;
  std::size_t test_units = 100;
  std::uint64_t seed = 2008;
  app.add_option("--out-dir", out_dir, "target directory");
  app.add_option("--subset", subset_name, "FD001 or FD003");
  app.add_option("--train-units", train_units, "run-to-failure training engines");
  app.add_option("--test-units", test_units, "truncated test engines");
  app.add_option("--seed", seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    rulkit::SynthConfig config;
    config.subset = rulkit::subset_from_string(subset_name);
    config.train_units = train_units;
    config.test_units = test_units;
    config.seed = seed;
    rulkit::synthesize_cmapss(config, out_dir);
    std::cout << "wrote " << rulkit::train_file(out_dir, config.subset).string() << ", "
              << rulkit::test_file(out_dir, config.subset).filename().string() << ", "
              << rulkit::truth_file(out_dir, config.subset).filename().string() << "\n";
  } catch (const rulkit::Error& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  return 0;
}
