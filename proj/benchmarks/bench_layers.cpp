#include <benchmark/benchmark.h>

#include <random>

#include "ferns/model.hpp"

namespace {

using namespace ferns;

Tensor random_input(const Shape& s, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor t(s);
  for (float& v : t.data()) v = u(rng);
  return t;
}

// Shapes of the two spatial layers of LeNet-5: 1->6 on 28x28, 6->16 on 14x14.
Shape layer_input(int which) {
  return which == 0 ? Shape{1, 1, 28, 28} : Shape{1, 6, 14, 14};
}
std::size_t layer_out(int which) { return which == 0 ? 6 : 16; }

void BM_FernForward(benchmark::State& state, const char* pattern) {
  const int which = static_cast<int>(state.range(0));
  const Shape in = layer_input(which);
  FernLayer<float> layer(in.c, layer_out(which), builtin_pattern(pattern));
  std::mt19937 rng(1);
  layer.initialize(rng);
  const Tensor x = random_input(in, 2);
  for (auto _ : state) {
    Tensor y = layer.forward(x);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.counters["mults/iter"] = benchmark::Counter(
      static_cast<double>(layer.counters().mults) / static_cast<double>(state.iterations()));
}

void BM_ConvForward(benchmark::State& state) {
  const int which = static_cast<int>(state.range(0));
  const Shape in = layer_input(which);
  ConvLayer<float> layer(in.c, layer_out(which), 5, 5);
  std::mt19937 rng(1);
  layer.initialize(rng);
  const Tensor x = random_input(in, 2);
  for (auto _ : state) {
    Tensor y = layer.forward(x);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.counters["mults/iter"] = benchmark::Counter(
      static_cast<double>(layer.counters().mults) / static_cast<double>(state.iterations()));
}

void BM_FernIndices(benchmark::State& state) {
  const Shape in = layer_input(static_cast<int>(state.range(0)));
  FernLayer<float> layer(in.c, 1, builtin_pattern("TI2"));
  const Tensor x = random_input(in, 3);
  for (auto _ : state) {
    IndexCache c = layer.compute_indices(x);
    benchmark::DoNotOptimize(c.index.data());
  }
}

void BM_LeNetForward(benchmark::State& state, const char* kind) {
  auto model = build_lenet5<float>(kind, 1);
  const Tensor x = random_input({static_cast<std::size_t>(state.range(0)), 1, 28, 28}, 4);
  for (auto _ : state) {
    Tensor y = model.forward(x);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_LeNetTrainStep(benchmark::State& state, const char* kind) {
  auto model = build_lenet5<float>(kind, 1);
  const std::size_t batch = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_input({batch, 1, 28, 28}, 5);
  std::vector<int> labels(batch);
  for (std::size_t q = 0; q < batch; ++q) labels[q] = static_cast<int>(q % 10);
  for (auto _ : state) {
    model.zero_grad();
    const auto r = softmax_cross_entropy(model.forward(x, true), labels);
    model.backward(r.dlogits);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_CAPTURE(BM_FernForward, TI1, "TI1")->Arg(0)->Arg(1);
BENCHMARK_CAPTURE(BM_FernForward, TI2, "TI2")->Arg(0)->Arg(1);
BENCHMARK_CAPTURE(BM_FernForward, TI3, "TI3")->Arg(0)->Arg(1);
BENCHMARK(BM_ConvForward)->Arg(0)->Arg(1);
BENCHMARK(BM_FernIndices)->Arg(0)->Arg(1);
BENCHMARK_CAPTURE(BM_LeNetForward, conv, "conv")->Arg(1)->Arg(64);
BENCHMARK_CAPTURE(BM_LeNetForward, TI2, "TI2")->Arg(1)->Arg(64);
BENCHMARK_CAPTURE(BM_LeNetForward, TI3, "TI3")->Arg(1)->Arg(64);
BENCHMARK_CAPTURE(BM_LeNetTrainStep, conv, "conv")->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_LeNetTrainStep, TI2, "TI2")->Arg(40)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
