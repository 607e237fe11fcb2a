#include <doctest.h>

#include <filesystem>

#include "oracles.hpp"
#include "pslab/checkpoint.hpp"
#include "pslab/runconfig.hpp"
#include "pslab/train.hpp"

using namespace pslab;

namespace {

SynthConfig desk_synth(int train, int dev, int test) {
  SynthConfig cfg;
  cfg.seed = 404;
  cfg.counts = {train, dev, test};
  return cfg;
}

OptimConfig smoke_optim(int epochs, int batch) {
  OptimConfig cfg = OptimConfig::mask_defaults();
  cfg.epochs = epochs;
  cfg.batch_size = batch;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST_CASE("mask training smoke: one epoch, finite loss, one log entry") {
  const SynthConfig synth = desk_synth(32, 4, 4);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  MaskNet model(MaskNetConfig{}, 1);
  const TrainLog log = train_mask_model(model, synth, split, smoke_optim(1, 8));
  REQUIRE(log.epochs.size() == 1);
  CHECK(std::isfinite(log.epochs[0].loss.total));
  CHECK(log.epochs[0].loss.total > 0.0);
  CHECK(log.epochs[0].loss.components.count("pyramid") == 1);
  CHECK(log.epochs[0].loss.components.count("binary") == 1);
}

TEST_CASE("training is deterministic under a fixed seed") {
  const SynthConfig synth = desk_synth(24, 4, 4);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);

  auto run = [&]() {
    MaskNet model(MaskNetConfig{}, 3);
    const TrainLog log = train_mask_model(model, synth, split, smoke_optim(2, 8));
    ScoreSet scores = score_samples(model, synth, split.test, "test");
    return std::make_pair(log.epochs.back().loss.total, scores);
  };
  const auto [loss_a, scores_a] = run();
  const auto [loss_b, scores_b] = run();
  CHECK(loss_a == loss_b);
  REQUIRE(scores_a.size() == scores_b.size());
  for (size_t i = 0; i < scores_a.size(); ++i)
    CHECK(scores_a.entries[i].score == scores_b.entries[i].score);
}

TEST_CASE("mask training descends on a small intra protocol (3-seed majority)") {
  const SynthConfig synth = desk_synth(64, 8, 8);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  int descended = 0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    MaskNet model(MaskNetConfig{}, seed);
    OptimConfig optim = smoke_optim(20, 16);
    optim.seed = seed;
    const TrainLog log = train_mask_model(model, synth, split, optim);
    if (log.epochs.back().loss.total < log.epochs.front().loss.total) ++descended;
  }
  CHECK(descended >= 2);
}

TEST_CASE("depth training smoke, determinism and descent") {
  const SynthConfig synth = desk_synth(24, 4, 4);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  OptimConfig optim = OptimConfig::depth_defaults();
  optim.epochs = 5;
  optim.batch_size = 8;
  optim.seed = 9;

  DepthNet a(DepthNetConfig{}, 5);
  const TrainLog log_a = train_depth_model(a, synth, split, optim);
  REQUIRE(log_a.epochs.size() == 5);
  CHECK(std::isfinite(log_a.epochs.back().loss.total));
  CHECK(log_a.epochs.back().loss.components.count("mse") == 1);
  CHECK(log_a.epochs.back().loss.components.count("cdl") == 1);
  CHECK(log_a.epochs.back().loss.total < log_a.epochs.front().loss.total);

  DepthNet b(DepthNetConfig{}, 5);
  const TrainLog log_b = train_depth_model(b, synth, split, optim);
  CHECK(log_a.epochs.back().loss.total == log_b.epochs.back().loss.total);
}

TEST_CASE("spp training smoke") {
  const SynthConfig synth = desk_synth(24, 4, 4);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  SppNet model(MaskNetConfig{}, 7);
  const TrainLog log = train_spp_model(model, synth, split, smoke_optim(2, 8));
  CHECK(log.epochs.size() == 2);
  CHECK(std::isfinite(log.epochs.back().loss.total));
}

TEST_CASE("empty train split raises") {
  SynthConfig synth = desk_synth(8, 0, 4);
  ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  split.train.clear();
  MaskNet model(MaskNetConfig{}, 1);
  CHECK_THROWS_AS(train_mask_model(model, synth, split, smoke_optim(1, 8)), Error);
}

TEST_CASE("lr halving changes the trajectory only after the named epoch") {
  const SynthConfig synth = desk_synth(16, 0, 4);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  OptimConfig base = smoke_optim(2, 8);
  OptimConfig halved = base;
  halved.lr_halve_epoch = 2;

  MaskNet m1(MaskNetConfig{}, 2);
  MaskNet m2(MaskNetConfig{}, 2);
  const TrainLog a = train_mask_model(m1, synth, split, base);
  const TrainLog b = train_mask_model(m2, synth, split, halved);
  CHECK(a.epochs[0].loss.total == b.epochs[0].loss.total);  // epoch 1 identical
  CHECK(a.epochs[1].loss.total != b.epochs[1].loss.total);  // epoch 2 differs
}

TEST_CASE("report assembly: perfect, constant and consistency") {
  ScoreSet dev, test;
  for (int i = 0; i < 10; ++i) {
    dev.add(0.9 + 0.001 * i, BinaryClass::bonafide, "", "dev");
    dev.add(0.1 - 0.001 * i, BinaryClass::attack, "print", "dev");
    test.add(0.8 + 0.001 * i, BinaryClass::bonafide, "", "test");
    test.add(0.2 - 0.001 * i, BinaryClass::attack, i % 2 ? "print" : "replay", "test");
  }
  const EvalReport r = report_from_scores(dev, test, MetricsConfig{});
  CHECK(r.acer == 0.0);
  CHECK(r.auc == 1.0);
  CHECK(r.eer == 0.0);
  CHECK(r.hter == 0.0);
  CHECK(r.acer == doctest::Approx((r.apcer + r.bpcer) / 2.0).epsilon(1e-15));

  ScoreSet const_test;
  for (int i = 0; i < 10; ++i)
    const_test.add(0.5, i % 2 ? BinaryClass::bonafide : BinaryClass::attack, i % 2 ? "" : "print",
                   "test");
  MetricsConfig fixed;
  fixed.policy = MetricsConfig::ThresholdPolicy::fixed;
  const EvalReport rc = report_from_scores(ScoreSet{}, const_test, fixed);
  CHECK(rc.auc == 0.5);
  CHECK(rc.threshold == 0.5);
}

TEST_CASE("evaluated report is internally consistent on a trained desk model") {
  const SynthConfig synth = desk_synth(48, 16, 16);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  MaskNet model(MaskNetConfig{}, 11);
  OptimConfig optim = smoke_optim(3, 16);
  const TrainLog log = train_mask_model(model, synth, split, optim);
  CHECK(log.epochs.size() == 3);
  ScoreSet dev, test;
  const EvalReport r = evaluate_model(model, synth, split, MetricsConfig{}, &dev, &test);
  CHECK(dev.size() == split.dev.size());
  CHECK(test.size() == split.test.size());
  CHECK(r.acer == doctest::Approx((r.apcer + r.bpcer) / 2.0).epsilon(1e-15));
  CHECK(r.auc >= 0.0);
  CHECK(r.auc <= 1.0);
  for (const auto& [type, v] : r.per_attack_apcer) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("checkpoint round-trip reproduces scores bitwise") {
  namespace fs = std::filesystem;
  const SynthConfig synth = desk_synth(16, 4, 8);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  MaskNetConfig net_cfg;
  MaskNet model(net_cfg, 13);
  train_mask_model(model, synth, split, smoke_optim(1, 8));

  const ScoreSet before = score_samples(model, synth, split.test, "test");

  const fs::path dir = fs::temp_directory_path() / "pslab_ckpt_test";
  fs::remove_all(dir);
  ModelConfig mc;
  mc.kind = "mask";
  mc.seed = 13;
  mc.mask = net_cfg;
  save_checkpoint(dir.string(), "mask", model_config_to_json(mc), 13, 1, model.params());

  const CheckpointInfo info = load_checkpoint_info(dir.string());
  CHECK(info.kind == "mask");
  CHECK(info.epoch == 1);
  const ModelConfig parsed = parse_model_config(info.config_json);
  MaskNet restored(parsed.mask, parsed.seed);
  load_checkpoint_params(dir.string(), restored.params());

  const ScoreSet after = score_samples(restored, synth, split.test, "test");
  REQUIRE(after.size() == before.size());
  for (size_t i = 0; i < after.size(); ++i)
    CHECK(after.entries[i].score == before.entries[i].score);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint loading validates names and shapes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "pslab_ckpt_bad";
  fs::remove_all(dir);
  MaskNet model(MaskNetConfig{}, 1);
  ModelConfig mc;
  save_checkpoint(dir.string(), "mask", model_config_to_json(mc), 1, 0, model.params());

  MaskNetConfig other;
  other.feature_channels = 32;
  MaskNet smaller(other, 1);
  CHECK_THROWS_AS(load_checkpoint_params(dir.string(), smaller.params()), ShapeError);
  fs::remove_all(dir);
}

TEST_CASE("train log serializes one epoch per line") {
  TrainLog log;
  log.seed = 5;
  log.config_hash = "abc";
  EpochLog e;
  e.epoch = 1;
  e.loss.total = 0.5;
  log.epochs.push_back(e);
  e.epoch = 2;
  log.epochs.push_back(e);
  const std::string text = log.to_jsonl();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find("\"epoch\":1") != std::string::npos);
  CHECK(text.find("\"config_hash\":\"abc\"") != std::string::npos);
}

TEST_CASE("cross-type fold harness holds out each attack type once") {
  SynthConfig synth = desk_synth(24, 8, 8);
  synth.attack_types = {AttackType::print, AttackType::replay};
  OptimConfig optim = smoke_optim(1, 8);
  const LooSummary summary =
      run_cross_type_folds(synth, MaskNetConfig{}, optim, LossConfig{}, MetricsConfig{}, 3);
  REQUIRE(summary.folds.size() == 2);
  CHECK(summary.folds[0].held_out == "print");
  CHECK(summary.folds[1].held_out == "replay");
  const double mean = (summary.folds[0].report.acer + summary.folds[1].report.acer) / 2.0;
  CHECK(summary.acer_mean == doctest::Approx(mean).epsilon(1e-12));
  CHECK(summary.acer_std >= 0.0);
  CHECK(summary.eer_mean >= 0.0);
}

TEST_CASE("parallel scoring equals serial scoring byte for byte") {
  const SynthConfig synth = desk_synth(8, 0, 12);
  const ProtocolSplit split = build_protocol(synth, ProtocolKind::intra);
  MaskNet model(MaskNetConfig{}, 19);

  const ScoreSet serial = score_samples(model, synth, split.test, "test");
  setenv("PSLAB_THREADS", "3", 1);
  const ScoreSet parallel = score_samples(model, synth, split.test, "test");
  unsetenv("PSLAB_THREADS");
  REQUIRE(serial.size() == parallel.size());
  for (size_t i = 0; i < serial.size(); ++i)
    CHECK(serial.entries[i].score == parallel.entries[i].score);
}
