#include <benchmark/benchmark.h>

#include <filesystem>

#include "rulkit/data.hpp"
#include "rulkit/synth.hpp"

using namespace rulkit;

namespace {

const std::filesystem::path& corpus_dir() {
  static std::filesystem::path dir = [] {
    const auto path = std::filesystem::temp_directory_path() / "rulkit_bench_data";
    SynthConfig config;
    config.train_units = 20;
    config.test_units = 10;
    synthesize_cmapss(config, path);
    return path;
  }();
  return dir;
}

}  // namespace

static void BM_ParseCmapss(benchmark::State& state) {
  const auto path = train_file(corpus_dir(), Subset::FD001);
  for (auto _ : state) benchmark::DoNotOptimize(parse_cmapss(path));
}
BENCHMARK(BM_ParseCmapss);

static void BM_PipelineToWindows(benchmark::State& state) {
  const auto records = parse_cmapss(train_file(corpus_dir(), Subset::FD001));
  for (auto _ : state) {
    FeatureFrame frame = select_features(records, Subset::FD001);
    frame = apply_minmax(frame, fit_minmax(frame));
    const auto targets = piecewise_rul(frame);
    benchmark::DoNotOptimize(generate_windows(frame, 90, targets));
  }
}
BENCHMARK(BM_PipelineToWindows);
