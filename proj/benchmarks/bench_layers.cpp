#include <benchmark/benchmark.h>

#include "rulkit/layers.hpp"

using namespace rulkit;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(values));
}

}  // namespace

static void BM_DenseForward(benchmark::State& state) {
  Rng rng(1);
  DenseLayer layer(90, 64, Activation::leaky_relu, rng);
  Tensor x = random_tensor({128, 90}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(x));
}
BENCHMARK(BM_DenseForward);

static void BM_LstmStep(benchmark::State& state) {
  const std::size_t hidden = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  RecurrentCell cell = RecurrentCell::lstm(17, hidden, rng);
  Tensor x = random_tensor({128, 17}, rng);
  Tensor h = Tensor::zeros({128, hidden});
  Tensor c = Tensor::zeros({128, hidden});
  for (auto _ : state) {
    auto [nh, nc] = cell.lstm_step(x, h, c);
    benchmark::DoNotOptimize(nh);
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(64);

static void BM_GruStep(benchmark::State& state) {
  Rng rng(3);
  RecurrentCell cell = RecurrentCell::gru(17, 32, rng);
  Tensor x = random_tensor({128, 17}, rng);
  Tensor h = Tensor::zeros({128, 32});
  for (auto _ : state) benchmark::DoNotOptimize(cell.gru_step(x, h));
}
BENCHMARK(BM_GruStep);

static void BM_Conv1dForward(benchmark::State& state) {
  Rng rng(4);
  Conv1DLayer layer(1, 16, 5, 1, Padding::same, rng);
  Tensor seq = random_tensor({1, 90}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(layer.forward(seq));
}
BENCHMARK(BM_Conv1dForward);

static void BM_BatchNormTraining(benchmark::State& state) {
  Rng rng(5);
  BatchNormLayer bn(64);
  Tensor x = random_tensor({128, 64}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bn.forward(x, true));
}
BENCHMARK(BM_BatchNormTraining);
