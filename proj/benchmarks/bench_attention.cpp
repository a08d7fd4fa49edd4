#include <benchmark/benchmark.h>

#include "rulkit/attention.hpp"

using namespace rulkit;

namespace {

Tensor random_sequence(std::size_t steps, std::size_t dim, Rng& rng) {
  std::vector<double> values(steps * dim);
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data({steps, dim}, std::move(values));
}

}  // namespace

static void BM_SelfAttentionPairwise(benchmark::State& state) {
  const std::size_t steps = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  auto layer = SelfAttentionLayer::make(17, 32, {}, rng);
  Tensor x = random_sequence(steps, 17, rng);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(x));
}
BENCHMARK(BM_SelfAttentionPairwise)->Arg(30)->Arg(90);

static void BM_SelfAttentionBilinear(benchmark::State& state) {
  Rng rng(2);
  AttentionConfig config;
  config.score_kind = ScoreKind::multiplicative;
  auto layer = SelfAttentionLayer::make(17, 32, config, rng);
  Tensor x = random_sequence(90, 17, rng);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(x));
}
BENCHMARK(BM_SelfAttentionBilinear);

static void BM_AttentionRegularizer(benchmark::State& state) {
  Rng rng(3);
  Tensor weights = softmax_rows(random_sequence(90, 90, rng));
  for (auto _ : state) benchmark::DoNotOptimize(attention_regularizer(weights, 1e-4));
}
BENCHMARK(BM_AttentionRegularizer);
