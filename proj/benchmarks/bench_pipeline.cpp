#include <benchmark/benchmark.h>

#include "pslab/metrics.hpp"
#include "pslab/prng.hpp"
#include "pslab/train.hpp"

using namespace pslab;

namespace {

SynthConfig bench_synth(int train) {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.counts = {train, 16, 16};
  return cfg;
}

}  // namespace

static void BM_GenerateSample(benchmark::State& state) {
  const SynthConfig cfg = bench_synth(16);
  std::uint32_t i = 0;
  for (auto _ : state) {
    LabeledSample s = generate_sample(cfg, {0, AttackType::replay, i++ % 64});
    benchmark::DoNotOptimize(s.image.data());
  }
}
BENCHMARK(BM_GenerateSample);

static void BM_MaskNetScore(benchmark::State& state) {
  const SynthConfig cfg = bench_synth(16);
  MaskNet model(MaskNetConfig{}, 1);
  const LabeledSample s = generate_sample(cfg, {0, AttackType::none, 0});
  for (auto _ : state) benchmark::DoNotOptimize(model.score_image(s.image));
}
BENCHMARK(BM_MaskNetScore);

static void BM_DepthNetScore(benchmark::State& state) {
  const SynthConfig cfg = bench_synth(16);
  DepthNet model(DepthNetConfig{}, 1);
  const LabeledSample s = generate_sample(cfg, {0, AttackType::none, 0});
  for (auto _ : state) benchmark::DoNotOptimize(model.score_image(s.image));
}
BENCHMARK(BM_DepthNetScore);

static void BM_MaskTrainEpoch(benchmark::State& state) {
  const SynthConfig cfg = bench_synth(64);
  const ProtocolSplit split = build_protocol(cfg, ProtocolKind::intra);
  MaskNet model(MaskNetConfig{}, 1);
  OptimConfig oc = OptimConfig::mask_defaults();
  oc.epochs = 1;
  oc.batch_size = 16;
  for (auto _ : state) {
    TrainLog log = train_mask_model(model, cfg, split, oc);
    benchmark::DoNotOptimize(log.epochs.back().loss.total);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_MaskTrainEpoch)->Unit(benchmark::kMillisecond);

static void BM_EerSweep(benchmark::State& state) {
  Prng rng(5);
  ScoreSet scores;
  for (int i = 0; i < 2000; ++i)
    scores.add(rng.next_double(), i % 2 ? BinaryClass::bonafide : BinaryClass::attack,
               i % 2 ? "" : "print");
  for (auto _ : state) benchmark::DoNotOptimize(eer(scores).eer);
}
BENCHMARK(BM_EerSweep);

static void BM_RocAuc(benchmark::State& state) {
  Prng rng(6);
  ScoreSet scores;
  for (int i = 0; i < 2000; ++i)
    scores.add(rng.next_double(), i % 2 ? BinaryClass::bonafide : BinaryClass::attack,
               i % 2 ? "" : "print");
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(scores));
}
BENCHMARK(BM_RocAuc);

BENCHMARK_MAIN();
