#include <benchmark/benchmark.h>

#include "pslab/gradcheck.hpp"
#include "pslab/ops.hpp"
#include "pslab/prng.hpp"

using namespace pslab;

namespace {

Tensor rnd(Shape shape, std::uint64_t seed) {
  Prng rng(seed);
  Tensor t(std::move(shape));
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

static void BM_Conv2dForward(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int side = static_cast<int>(state.range(1));
  Tensor x = rnd({16, c, side, side}, 1);
  Tensor w = rnd({c, c, 3, 3}, 2);
  Tensor b = rnd({c}, 3);
  for (auto _ : state) {
    Graph g;
    Var y = ops::conv2d(g, g.constant(x), g.constant(w), g.constant(b), 1, 1);
    benchmark::DoNotOptimize(g.value(y).data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Conv2dForward)->Args({16, 32})->Args({32, 16})->Args({64, 8});

static void BM_Conv2dTrainStep(benchmark::State& state) {
  const int c = static_cast<int>(state.range(0));
  const int side = static_cast<int>(state.range(1));
  Tensor x = rnd({16, c, side, side}, 1);
  x.set_requires_grad(true);
  Tensor w = rnd({c, c, 3, 3}, 2);
  w.set_requires_grad(true);
  Tensor b = rnd({c}, 3);
  b.set_requires_grad(true);
  for (auto _ : state) {
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
    Graph g;
    Var y = ops::conv2d(g, g.parameter(x), g.parameter(w), g.parameter(b), 1, 1);
    g.backward(ops::mean(g, y));
    benchmark::DoNotOptimize(w.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_Conv2dTrainStep)->Args({16, 32})->Args({32, 16})->Args({64, 8});

static void BM_CdcConv2d(benchmark::State& state) {
  Tensor x = rnd({16, 32, 32, 32}, 1);
  Tensor w = rnd({32, 32, 3, 3}, 2);
  Tensor b = rnd({32}, 3);
  const CdcTheta theta(0.7);
  for (auto _ : state) {
    Graph g;
    Var y = ops::cdc_conv2d(g, g.constant(x), g.constant(w), g.constant(b), 1, 1, theta);
    benchmark::DoNotOptimize(g.value(y).data());
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_CdcConv2d);

static void BM_AvgPool(benchmark::State& state) {
  Tensor x = rnd({16, 64, 8, 8}, 1);
  for (auto _ : state) {
    Graph g;
    Var y = ops::avgpool2d(g, g.constant(x), 2, 2);
    benchmark::DoNotOptimize(g.value(y).data());
  }
}
BENCHMARK(BM_AvgPool);

static void BM_PyramidBce(benchmark::State& state) {
  Tensor pred = rnd({16, 1, 8, 8}, 1);
  for (std::int64_t i = 0; i < pred.numel(); ++i) pred[i] = 0.5 + 0.4 * pred[i];
  Tensor target({16, 1, 8, 8}, 1.0);
  for (auto _ : state) {
    Graph g;
    Var loss = ops::bce(g, g.constant(pred), target);
    benchmark::DoNotOptimize(g.scalar(loss));
  }
}
BENCHMARK(BM_PyramidBce);

static void BM_Cdl(benchmark::State& state) {
  Tensor pred = rnd({16, 1, 32, 32}, 1);
  Tensor target = rnd({16, 1, 32, 32}, 2);
  for (auto _ : state) {
    Graph g;
    Var loss = ops::cdl(g, g.constant(pred), target);
    benchmark::DoNotOptimize(g.scalar(loss));
  }
}
BENCHMARK(BM_Cdl);
