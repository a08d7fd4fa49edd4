#include <benchmark/benchmark.h>

#include "rulkit/ops.hpp"
#include "rulkit/rng.hpp"

using namespace rulkit;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = rng.uniform(-1.0, 1.0);
  return Tensor::from_data(std::move(shape), std::move(values), requires_grad);
}

}  // namespace

static void BM_MatmulForward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  Tensor a = random_tensor({128, n}, rng);
  Tensor b = random_tensor({n, 64}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(matmul(a, b));
  }
  state.SetItemsProcessed(state.iterations() * 128 * n * 64);
}
BENCHMARK(BM_MatmulForward)->Arg(32)->Arg(90)->Arg(256);

static void BM_MatmulTrainStep(benchmark::State& state) {
  Rng rng(2);
  Tensor a = random_tensor({128, 90}, rng);
  Tensor w = random_tensor({90, 64}, rng, true);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = sum(square(matmul(a, w)));
    tape.backward(loss);
    w.zero_grad();
    benchmark::DoNotOptimize(loss);
  }
}
BENCHMARK(BM_MatmulTrainStep);

static void BM_SoftmaxRows(benchmark::State& state) {
  Rng rng(3);
  Tensor x = random_tensor({90, 90}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_rows(x));
}
BENCHMARK(BM_SoftmaxRows);

static void BM_ElementwiseChain(benchmark::State& state) {
  Rng rng(4);
  Tensor x = random_tensor({128, 544}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(leaky_relu(tanh_op(x)));
}
BENCHMARK(BM_ElementwiseChain);
