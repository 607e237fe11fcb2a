#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pslab/metrics.hpp"
#include "pslab/networks.hpp"
#include "pslab/optim.hpp"
#include "pslab/synth.hpp"

namespace pslab {

struct EpochLog {
  int epoch = 0;
  LossValue loss;
  double seconds = 0.0;
};

struct TrainLog {
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<EpochLog> epochs;

  // JSON-lines, one epoch per line.
  std::string to_jsonl() const;
};

struct MetricsConfig {
  enum class ThresholdPolicy { dev_eer, fixed };
  ThresholdPolicy policy = ThresholdPolicy::dev_eer;
  double fixed_threshold = 0.5;
};

// In-memory dataset for a list of refs; generation is deterministic, so a
// cache is purely an optimization.
class SampleCache {
 public:
  SampleCache(const SynthConfig& cfg, const std::vector<SampleRef>& refs);
  const LabeledSample& at(size_t i) const { return samples_[i]; }
  const SampleRef& ref(size_t i) const { return refs_[i]; }
  size_t size() const { return samples_.size(); }

 private:
  std::vector<SampleRef> refs_;
  std::vector<LabeledSample> samples_;
};

// Assembles batched supervision tensors for the given cache rows.
TrainBatch make_batch(const SampleCache& cache, const std::vector<size_t>& rows,
                      const std::vector<int>& mask_scales, const std::vector<int>& depth_scales);

// Mini-batch training with a seeded per-epoch shuffle; single-threaded and
// bit-reproducible under a fixed seed. The optimizer seed drives shuffling.
TrainLog train_mask_model(MaskNet& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                          const OptimConfig& optim, const LossConfig& loss = {});
TrainLog train_depth_model(DepthNet& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                           const OptimConfig& optim, const LossConfig& loss = {});
TrainLog train_spp_model(SppNet& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                         const OptimConfig& optim, const LossConfig& loss = {});

// Scores every ref (higher = more live). Honors PSLAB_THREADS for parallel
// scoring; results are stored by index and thus identical to the serial
// path.
template <class Model>
ScoreSet score_samples(Model& model, const SynthConfig& synth, const std::vector<SampleRef>& refs,
                       const std::string& fold);

// Threshold from the dev set (EER policy) or fixed; APCER/BPCER/ACER at
// that threshold on test, EER/AUC on test, HTER at the dev threshold.
EvalReport report_from_scores(const ScoreSet& dev, const ScoreSet& test, const MetricsConfig& cfg);

template <class Model>
EvalReport evaluate_model(Model& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                          const MetricsConfig& cfg, ScoreSet* dev_out = nullptr,
                          ScoreSet* test_out = nullptr);

// Full leave-one-type-out harness: one mask model trained and evaluated per
// enabled attack type, aggregated as mean +/- population std of ACER and
// EER across the held-out types (the per-fold reports are kept).
struct LooFold {
  std::string held_out;
  EvalReport report;
};

struct LooSummary {
  std::vector<LooFold> folds;
  double acer_mean = 0.0, acer_std = 0.0;
  double eer_mean = 0.0, eer_std = 0.0;
};

LooSummary run_cross_type_folds(const SynthConfig& synth, const MaskNetConfig& net_cfg,
                                const OptimConfig& optim, const LossConfig& loss,
                                const MetricsConfig& metrics, std::uint64_t model_seed);

int env_thread_cap();  // PSLAB_THREADS, default 1

}  // namespace pslab
