#include "pslab/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "pslab/prng.hpp"

namespace pslab {

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& e : epochs) {
    nlohmann::json j;
    j["epoch"] = e.epoch;
    j["loss"] = nlohmann::json::parse(e.loss.to_json());
    j["seconds"] = e.seconds;
    j["seed"] = seed;
    j["config_hash"] = config_hash;
    out += j.dump();
    out += '\n';
  }
  return out;
}

SampleCache::SampleCache(const SynthConfig& cfg, const std::vector<SampleRef>& refs) : refs_(refs) {
  samples_.reserve(refs.size());
  for (const auto& r : refs) samples_.push_back(generate_sample(cfg, r));
}

TrainBatch make_batch(const SampleCache& cache, const std::vector<size_t>& rows,
                      const std::vector<int>& mask_scales, const std::vector<int>& depth_scales) {
  PSLAB_CHECK(!rows.empty(), "empty batch");
  const int n = static_cast<int>(rows.size());
  const LabeledSample& first = cache.at(rows[0]);
  const int side = first.image.dim(1);

  TrainBatch batch;
  batch.images = Tensor({n, 3, side, side});
  batch.scalar_labels = Tensor({n, 1});
  for (int s : mask_scales) batch.mask_pyramid.push_back(Tensor({n, 1, s, s}));
  for (int s : depth_scales) batch.depth_pyramid.push_back(Tensor({n, 1, s, s}));

  const std::int64_t img_size = first.image.numel();
  for (int i = 0; i < n; ++i) {
    const LabeledSample& s = cache.at(rows[static_cast<size_t>(i)]);
    std::copy(s.image.data(), s.image.data() + img_size, batch.images.data() + i * img_size);
    batch.scalar_labels[i] = s.live ? 1.0 : 0.0;
    if (!mask_scales.empty()) {
      const MaskPyramid pyr = decompose_mask_pyramid(s.mask, mask_scales);
      for (size_t k = 0; k < mask_scales.size(); ++k) {
        const Tensor& m = pyr.maps[k];
        std::copy(m.data(), m.data() + m.numel(),
                  batch.mask_pyramid[k].data() + i * m.numel());
      }
    }
    if (!depth_scales.empty()) {
      const DepthPyramid pyr = decompose_depth_pyramid(s.depth, depth_scales);
      for (size_t k = 0; k < depth_scales.size(); ++k) {
        const Tensor& m = pyr.maps[k];
        std::copy(m.data(), m.data() + m.numel(),
                  batch.depth_pyramid[k].data() + i * m.numel());
      }
    }
  }
  return batch;
}

namespace {

std::string hash_strings(std::initializer_list<std::string> parts) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const auto& s : parts)
    for (unsigned char c : s) h = (h ^ c) * 0x100000001B3ull;
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void shuffled_order(std::vector<size_t>& order, Prng rng) {
  // Fisher-Yates
  for (size_t i = order.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
}

template <class Model>
TrainLog train_model(Model& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                     const OptimConfig& optim_cfg, const LossConfig& loss_cfg,
                     const std::vector<int>& mask_scales, const std::vector<int>& depth_scales) {
  optim_cfg.validate();
  PSLAB_CHECK(!protocol.train.empty(), "train split is empty");

  SampleCache cache(synth, protocol.train);
  Optimizer optimizer(optim_cfg, model.params());

  TrainLog log;
  log.seed = optim_cfg.seed;
  log.config_hash = hash_strings({std::to_string(synth.seed), std::to_string(optim_cfg.seed),
                                  std::to_string(optim_cfg.epochs), protocol_kind_name(protocol.kind),
                                  protocol.held_out, Model::kind()});

  std::vector<size_t> order(cache.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  const Prng shuffle_root = Prng(optim_cfg.seed).fork(key_of("shuffle"));
  for (int epoch = 1; epoch <= optim_cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr =
        optim_cfg.lr * (optim_cfg.lr_halve_epoch && epoch >= *optim_cfg.lr_halve_epoch ? 0.5 : 1.0);
    shuffled_order(order, shuffle_root.fork(static_cast<std::uint64_t>(epoch)));

    LossValue epoch_loss;
    const double inv_total = 1.0 / static_cast<double>(order.size());
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(optim_cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(optim_cfg.batch_size));
      const std::vector<size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
      const TrainBatch batch = make_batch(cache, rows, mask_scales, depth_scales);
      Graph g;
      LossVars loss = model.training_loss(g, batch, loss_cfg);
      optimizer.zero_grad();
      g.backward(loss.total);
      optimizer.step(lr);
      epoch_loss.accumulate(loss.value, static_cast<double>(rows.size()) * inv_total);
    }
    const auto t1 = std::chrono::steady_clock::now();
    log.epochs.push_back({epoch, epoch_loss, std::chrono::duration<double>(t1 - t0).count()});
  }
  return log;
}

}  // namespace

TrainLog train_mask_model(MaskNet& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                          const OptimConfig& optim, const LossConfig& loss) {
  return train_model(model, synth, protocol, optim, loss, model.config().scales, {});
}

TrainLog train_depth_model(DepthNet& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                           const OptimConfig& optim, const LossConfig& loss) {
  return train_model(model, synth, protocol, optim, loss, {}, model.config().scales);
}

TrainLog train_spp_model(SppNet& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                         const OptimConfig& optim, const LossConfig& loss) {
  return train_model(model, synth, protocol, optim, loss, {}, {});
}

int env_thread_cap() {
  const char* env = std::getenv("PSLAB_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

template <class Model>
ScoreSet score_samples(Model& model, const SynthConfig& synth, const std::vector<SampleRef>& refs,
                       const std::string& fold) {
  std::vector<double> scores(refs.size());
  const int threads = std::min<int>(env_thread_cap(), static_cast<int>(refs.size()));
  auto worker = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      const LabeledSample s = generate_sample(synth, refs[i]);
      scores[i] = model.score_image(s.image);
    }
  };
  if (threads <= 1) {
    worker(0, refs.size());
  } else {
    // Per-sample scoring is independent; results land by index, so any
    // thread count produces the serial byte stream.
    std::vector<std::thread> pool;
    const size_t chunk = (refs.size() + static_cast<size_t>(threads) - 1) / static_cast<size_t>(threads);
    for (int t = 0; t < threads; ++t) {
      const size_t begin = static_cast<size_t>(t) * chunk;
      const size_t end = std::min(refs.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  ScoreSet out;
  for (size_t i = 0; i < refs.size(); ++i) {
    const bool live = refs[i].type == AttackType::none;
    out.add(scores[i], live ? BinaryClass::bonafide : BinaryClass::attack,
            live ? "" : attack_type_name(refs[i].type), fold);
  }
  return out;
}

EvalReport report_from_scores(const ScoreSet& dev, const ScoreSet& test, const MetricsConfig& cfg) {
  EvalReport r;
  if (cfg.policy == MetricsConfig::ThresholdPolicy::dev_eer && !dev.entries.empty()) {
    r.threshold = eer(dev).threshold;
    r.hter = hter(dev, test);
  } else {
    r.threshold = cfg.fixed_threshold;
    r.hter = (far_at(test, r.threshold) + frr_at(test, r.threshold)) / 2.0;
  }
  const ApcerResult a = apcer(test, r.threshold);
  r.apcer = a.overall;
  r.per_attack_apcer = a.per_type;
  r.bpcer = bpcer(test, r.threshold);
  r.acer = acer(r.apcer, r.bpcer);
  r.eer = eer(test).eer;
  r.auc = roc_auc(test);
  return r;
}

template <class Model>
EvalReport evaluate_model(Model& model, const SynthConfig& synth, const ProtocolSplit& protocol,
                          const MetricsConfig& cfg, ScoreSet* dev_out, ScoreSet* test_out) {
  const ScoreSet dev = score_samples(model, synth, protocol.dev, "dev");
  const ScoreSet test = score_samples(model, synth, protocol.test, "test");
  if (dev_out) *dev_out = dev;
  if (test_out) *test_out = test;
  return report_from_scores(dev, test, cfg);
}

LooSummary run_cross_type_folds(const SynthConfig& synth, const MaskNetConfig& net_cfg,
                                const OptimConfig& optim, const LossConfig& loss,
                                const MetricsConfig& metrics, std::uint64_t model_seed) {
  LooSummary out;
  for (AttackType held : synth.attack_types) {
    const ProtocolSplit split =
        build_protocol(synth, ProtocolKind::cross_type_loo, attack_type_name(held));
    MaskNet model(net_cfg, model_seed);
    train_mask_model(model, synth, split, optim, loss);
    out.folds.push_back({attack_type_name(held), evaluate_model(model, synth, split, metrics)});
  }
  auto mean_std = [&](auto pick, double& mean, double& std) {
    mean = 0.0;
    for (const auto& f : out.folds) mean += pick(f.report);
    mean /= static_cast<double>(out.folds.size());
    double var = 0.0;
    for (const auto& f : out.folds) {
      const double d = pick(f.report) - mean;
      var += d * d;
    }
    std = std::sqrt(var / static_cast<double>(out.folds.size()));
  };
  mean_std([](const EvalReport& r) { return r.acer; }, out.acer_mean, out.acer_std);
  mean_std([](const EvalReport& r) { return r.eer; }, out.eer_mean, out.eer_std);
  return out;
}

template ScoreSet score_samples<MaskNet>(MaskNet&, const SynthConfig&,
                                         const std::vector<SampleRef>&, const std::string&);
template ScoreSet score_samples<DepthNet>(DepthNet&, const SynthConfig&,
                                          const std::vector<SampleRef>&, const std::string&);
template ScoreSet score_samples<SppNet>(SppNet&, const SynthConfig&,
                                        const std::vector<SampleRef>&, const std::string&);
template EvalReport evaluate_model<MaskNet>(MaskNet&, const SynthConfig&, const ProtocolSplit&,
                                            const MetricsConfig&, ScoreSet*, ScoreSet*);
template EvalReport evaluate_model<DepthNet>(DepthNet&, const SynthConfig&, const ProtocolSplit&,
                                             const MetricsConfig&, ScoreSet*, ScoreSet*);
template EvalReport evaluate_model<SppNet>(SppNet&, const SynthConfig&, const ProtocolSplit&,
                                           const MetricsConfig&, ScoreSet*, ScoreSet*);

}  // namespace pslab
