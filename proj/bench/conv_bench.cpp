// OpenMP kernels against the serial reference, plus whole-model forward
// passes for the two attention variants.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "efrlfn/kernels.hpp"
#include "efrlfn/model.hpp"

namespace {

using namespace efrlfn;

struct ConvCase {
  kernels::ConvGeometry g;
  std::vector<float> input, weight, bias, output;

  ConvCase(std::size_t channels, std::size_t h, std::size_t w) {
    g = kernels::ConvGeometry::make(Shape{1, channels, h, w}, Shape{channels, channels, 3, 3}, 1, 1);
    std::mt19937 rng(7);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    input.resize(channels * h * w);
    weight.resize(channels * channels * 9);
    bias.resize(channels);
    for (auto* v : {&input, &weight, &bias})
      for (float& x : *v) x = u(rng);
    output.resize(g.output_shape().numel());
  }
};

void BM_ConvForwardOmp(benchmark::State& state) {
  ConvCase c(static_cast<std::size_t>(state.range(0)), 90, 160);
  for (auto _ : state) {
    kernels::conv2d_forward<float>(c.g, c.input, c.weight, c.bias, c.output);
    benchmark::DoNotOptimize(c.output.data());
  }
}

void BM_ConvForwardReference(benchmark::State& state) {
  ConvCase c(static_cast<std::size_t>(state.range(0)), 90, 160);
  for (auto _ : state) {
    kernels::conv2d_forward_reference<float>(c.g, c.input, c.weight, c.bias, c.output);
    benchmark::DoNotOptimize(c.output.data());
  }
}

void BM_ConvBackwardInputOmp(benchmark::State& state) {
  ConvCase c(static_cast<std::size_t>(state.range(0)), 90, 160);
  std::vector<float> grad(c.input.size());
  for (auto _ : state) {
    kernels::conv2d_backward_input<float>(c.g, c.output, c.weight, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}

void BM_ConvBackwardInputReference(benchmark::State& state) {
  ConvCase c(static_cast<std::size_t>(state.range(0)), 90, 160);
  std::vector<float> grad(c.input.size());
  for (auto _ : state) {
    kernels::conv2d_backward_input_reference<float>(c.g, c.output, c.weight, grad);
    benchmark::DoNotOptimize(grad.data());
  }
}

void BM_ModelForward(benchmark::State& state) {
  ModelConfig config;
  config.channels = 48;
  config.attention = state.range(0) == 0 ? Attention::eca : Attention::esa;
  const Model<float> model = Model<float>::build(config);
  Tensor<float> frame(Shape{1, 3, 90, 160}, 0.5f);
  for (auto _ : state) {
    Tensor<float> out = model.infer(frame);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetLabel(config.attention == Attention::eca ? "eca" : "esa");
}

}  // namespace

BENCHMARK(BM_ConvForwardOmp)->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardReference)->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInputOmp)->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInputReference)->Arg(16)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelForward)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
