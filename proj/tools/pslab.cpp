// pslab command line: synthesize datasets, train and evaluate the
// pyramid-supervised models, run scale ablations and dump predicted-mask
// visualizations.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pslab/checkpoint.hpp"
#include "pslab/image_io.hpp"
#include "pslab/runconfig.hpp"
#include "pslab/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOptions {
  std::string config_path;
  std::string checkpoint;
  std::string out_override;
  std::string scales_override;
  std::optional<std::uint64_t> seed_override;
  bool quiet = false;
};

std::vector<int> parse_scales_flag(const std::string& text) {
  std::vector<int> scales;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      scales.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw pslab::ConfigError("--scales expects a comma-separated integer list, got '" + text + "'");
    }
  }
  if (scales.empty()) throw pslab::ConfigError("--scales list is empty");
  return scales;
}

pslab::RunConfig resolve_config(const CliOptions& opts) {
  if (opts.config_path.empty()) throw pslab::ConfigError("--config is required");
  pslab::RunConfig cfg = pslab::load_run_config(opts.config_path);
  if (opts.seed_override) {
    cfg.synth.seed = *opts.seed_override;
    cfg.model.seed = *opts.seed_override;
    cfg.optim.seed = *opts.seed_override;
  }
  if (!opts.out_override.empty()) cfg.output_dir = opts.out_override;
  if (!opts.scales_override.empty()) {
    const auto scales = parse_scales_flag(opts.scales_override);
    if (cfg.model.kind == "depth")
      cfg.model.depth.scales = scales;
    else
      cfg.model.mask.scales = scales;
    cfg.model.validate();
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw pslab::IoError("cannot write " + path.string());
  f << text;
}

void echo_config(const pslab::RunConfig& cfg) {
  write_text(fs::path(cfg.output_dir) / "config.json", pslab::run_config_to_json(cfg) + "\n");
}

void note(const CliOptions& opts, const std::string& line) {
  if (!opts.quiet) std::cout << line << "\n";
}

// ---- synth ---------------------------------------------------------------

int cmd_synth(const CliOptions& opts) {
  pslab::RunConfig cfg = resolve_config(opts);
  const pslab::ProtocolSplit split =
      pslab::build_protocol(cfg.synth, cfg.protocol.kind, cfg.protocol.held_out);
  fs::create_directories(cfg.output_dir);
  echo_config(cfg);
  pslab::export_split(cfg.synth, split, cfg.output_dir);
  note(opts, "wrote dataset (" + std::to_string(split.train.size()) + " train / " +
                 std::to_string(split.dev.size()) + " dev / " + std::to_string(split.test.size()) +
                 " test) to " + cfg.output_dir);
  return 0;
}

// ---- train ---------------------------------------------------------------

int cmd_train(const CliOptions& opts) {
  pslab::RunConfig cfg = resolve_config(opts);
  const pslab::ProtocolSplit split =
      pslab::build_protocol(cfg.synth, cfg.protocol.kind, cfg.protocol.held_out);
  if (cfg.model.mask.input_side != cfg.synth.image_side)
    throw pslab::ShapeError("model.input_side (" + std::to_string(cfg.model.mask.input_side) +
                            ") must match synth.image_side (" +
                            std::to_string(cfg.synth.image_side) + ")");
  fs::create_directories(cfg.output_dir);
  echo_config(cfg);

  pslab::TrainLog log;
  const std::string model_json = pslab::model_config_to_json(cfg.model);
  const std::string ckpt_dir = (fs::path(cfg.output_dir) / "checkpoint").string();
  if (cfg.model.kind == "mask") {
    pslab::MaskNet model(cfg.model.mask, cfg.model.seed);
    log = pslab::train_mask_model(model, cfg.synth, split, cfg.optim, cfg.loss);
    pslab::save_checkpoint(ckpt_dir, "mask", model_json, cfg.model.seed, cfg.optim.epochs,
                           model.params());
  } else if (cfg.model.kind == "depth") {
    pslab::DepthNet model(cfg.model.depth, cfg.model.seed);
    log = pslab::train_depth_model(model, cfg.synth, split, cfg.optim, cfg.loss);
    pslab::save_checkpoint(ckpt_dir, "depth", model_json, cfg.model.seed, cfg.optim.epochs,
                           model.params());
  } else {
    pslab::SppNet model(cfg.model.mask, cfg.model.seed);
    log = pslab::train_spp_model(model, cfg.synth, split, cfg.optim, cfg.loss);
    pslab::save_checkpoint(ckpt_dir, "spp", model_json, cfg.model.seed, cfg.optim.epochs,
                           model.params());
  }
  write_text(fs::path(cfg.output_dir) / "trainlog.jsonl", log.to_jsonl());
  if (!log.epochs.empty())
    note(opts, "trained " + cfg.model.kind + " model, final loss " +
                   std::to_string(log.epochs.back().loss.total));
  note(opts, "checkpoint written to " + ckpt_dir);
  return 0;
}

// ---- eval ----------------------------------------------------------------

template <class Model>
pslab::EvalReport run_eval(Model& model, const pslab::RunConfig& cfg,
                           const pslab::ProtocolSplit& split, pslab::ScoreSet& dev,
                           pslab::ScoreSet& test) {
  return pslab::evaluate_model(model, cfg.synth, split, cfg.metrics, &dev, &test);
}

int cmd_eval(const CliOptions& opts) {
  pslab::RunConfig cfg = resolve_config(opts);
  if (opts.checkpoint.empty()) throw pslab::ConfigError("--checkpoint is required for eval");
  const pslab::CheckpointInfo info = pslab::load_checkpoint_info(opts.checkpoint);
  const pslab::ModelConfig model_cfg = pslab::parse_model_config(info.config_json);
  if (model_cfg.mask.input_side != cfg.synth.image_side)
    throw pslab::ShapeError("checkpoint expects input side " +
                            std::to_string(model_cfg.mask.input_side) +
                            " but synth.image_side is " + std::to_string(cfg.synth.image_side));

  const pslab::ProtocolSplit split =
      pslab::build_protocol(cfg.synth, cfg.protocol.kind, cfg.protocol.held_out);
  fs::create_directories(cfg.output_dir);
  echo_config(cfg);

  pslab::ScoreSet dev, test;
  pslab::EvalReport report;
  if (info.kind == "mask") {
    pslab::MaskNet model(model_cfg.mask, model_cfg.seed);
    pslab::load_checkpoint_params(opts.checkpoint, model.params());
    report = run_eval(model, cfg, split, dev, test);
  } else if (info.kind == "depth") {
    pslab::DepthNet model(model_cfg.depth, model_cfg.seed);
    pslab::load_checkpoint_params(opts.checkpoint, model.params());
    report = run_eval(model, cfg, split, dev, test);
  } else if (info.kind == "spp") {
    pslab::SppNet model(model_cfg.mask, model_cfg.seed);
    pslab::load_checkpoint_params(opts.checkpoint, model.params());
    report = run_eval(model, cfg, split, dev, test);
  } else {
    throw pslab::ModeError("unknown checkpoint kind '" + info.kind + "'");
  }

  json out = json::parse(report.to_json());
  out["protocol"] = pslab::protocol_kind_name(cfg.protocol.kind);
  out["held_out"] = cfg.protocol.held_out;
  out["model_kind"] = info.kind;
  write_text(fs::path(cfg.output_dir) / "report.json", out.dump(2) + "\n");
  pslab::save_scores_csv((fs::path(cfg.output_dir) / "scores_dev.csv").string(), dev);
  pslab::save_scores_csv((fs::path(cfg.output_dir) / "scores_test.csv").string(), test);
  note(opts, "ACER " + pslab::format_percent(report.acer) + "%  EER " +
                 pslab::format_percent(report.eer) + "%  AUC " + pslab::format_percent(report.auc) +
                 "%");
  return 0;
}

// ---- ablate ----------------------------------------------------------------

std::string scales_label(const std::vector<int>& scales) {
  std::string s;
  for (size_t i = 0; i < scales.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(scales[i]);
  }
  return s;
}

int cmd_ablate(const CliOptions& opts) {
  pslab::RunConfig cfg = resolve_config(opts);
  if (cfg.ablate.scale_sets.size() < 2)
    throw pslab::ConfigError("ablate.scale_sets needs at least two scale sets");
  const pslab::ProtocolSplit split =
      pslab::build_protocol(cfg.synth, cfg.protocol.kind, cfg.protocol.held_out);
  fs::create_directories(cfg.output_dir);
  echo_config(cfg);

  json rows = json::array();
  std::ostringstream csv;
  csv << "label_kind,scales,seeds,acer_mean_percent,acer_std_percent\n";
  for (const auto& scales : cfg.ablate.scale_sets) {
    std::vector<double> acers;
    for (std::uint64_t seed : cfg.ablate.seeds) {
      pslab::OptimConfig optim = cfg.optim;
      optim.seed = seed;
      pslab::EvalReport report;
      if (cfg.ablate.label_kind == "mask") {
        pslab::MaskNetConfig mc = cfg.model.mask;
        mc.scales = scales;
        mc.validate();
        pslab::MaskNet model(mc, seed);
        pslab::train_mask_model(model, cfg.synth, split, optim, cfg.loss);
        report = pslab::evaluate_model(model, cfg.synth, split, cfg.metrics);
      } else {
        pslab::DepthNetConfig dc = cfg.model.depth;
        dc.scales = scales;
        dc.validate();
        pslab::DepthNet model(dc, seed);
        pslab::train_depth_model(model, cfg.synth, split, optim, cfg.loss);
        report = pslab::evaluate_model(model, cfg.synth, split, cfg.metrics);
      }
      acers.push_back(report.acer);
      note(opts, "scales " + scales_label(scales) + " seed " + std::to_string(seed) + ": ACER " +
                     pslab::format_percent(report.acer) + "%");
    }
    double mean = 0.0;
    for (double a : acers) mean += a;
    mean /= static_cast<double>(acers.size());
    double var = 0.0;
    for (double a : acers) var += (a - mean) * (a - mean);
    const double stddev = std::sqrt(var / static_cast<double>(acers.size()));

    json row;
    row["label_kind"] = cfg.ablate.label_kind;
    row["scales"] = scales;
    row["seeds"] = cfg.ablate.seeds;
    row["acer_percent"] = json::array();
    for (double a : acers) row["acer_percent"].push_back(a * 100.0);
    row["acer_mean_percent"] = mean * 100.0;
    row["acer_std_percent"] = stddev * 100.0;
    rows.push_back(row);
    csv << cfg.ablate.label_kind << ',' << scales_label(scales) << ',' << cfg.ablate.seeds.size()
        << ',' << pslab::format_percent(mean, 2) << ',' << pslab::format_percent(stddev, 2) << "\n";
  }
  write_text(fs::path(cfg.output_dir) / "ablation.json", rows.dump(2) + "\n");
  write_text(fs::path(cfg.output_dir) / "ablation.csv", csv.str());
  note(opts, "ablation table written to " + cfg.output_dir);
  return 0;
}

// ---- visualize -------------------------------------------------------------

pslab::Tensor upsample_nearest(const pslab::Tensor& map, int out_side) {
  const int side = map.dim(0);
  const int factor = out_side / side;
  pslab::Tensor out({out_side, out_side});
  for (int y = 0; y < out_side; ++y)
    for (int x = 0; x < out_side; ++x) out.at({y, x}) = map.at({y / factor, x / factor});
  return out;
}

int cmd_visualize(const CliOptions& opts) {
  pslab::RunConfig cfg = resolve_config(opts);
  if (opts.checkpoint.empty()) throw pslab::ConfigError("--checkpoint is required for visualize");
  const pslab::CheckpointInfo info = pslab::load_checkpoint_info(opts.checkpoint);
  if (info.kind != "mask")
    throw pslab::ModeError("visualize needs a mask checkpoint; for depth models dump the "
                           "predicted map via eval instead");
  const pslab::ModelConfig model_cfg = pslab::parse_model_config(info.config_json);
  if (model_cfg.mask.input_side != cfg.synth.image_side)
    throw pslab::ShapeError("checkpoint expects input side " +
                            std::to_string(model_cfg.mask.input_side) +
                            " but synth.image_side is " + std::to_string(cfg.synth.image_side));
  pslab::MaskNet model(model_cfg.mask, model_cfg.seed);
  pslab::load_checkpoint_params(opts.checkpoint, model.params());

  const pslab::ProtocolSplit split =
      pslab::build_protocol(cfg.synth, cfg.protocol.kind, cfg.protocol.held_out);
  fs::create_directories(cfg.output_dir);
  echo_config(cfg);

  // Alternate live and spoof test samples so the panel shows both classes.
  std::vector<pslab::SampleRef> picks;
  {
    std::vector<pslab::SampleRef> lives, spoofs;
    for (const auto& r : split.test)
      (r.type == pslab::AttackType::none ? lives : spoofs).push_back(r);
    size_t li = 0, si = 0;
    while (picks.size() < static_cast<size_t>(cfg.visualize.count) &&
           (li < lives.size() || si < spoofs.size())) {
      if (li < lives.size() && (picks.size() % 2 == 0 || si >= spoofs.size()))
        picks.push_back(lives[li++]);
      else
        picks.push_back(spoofs[si++]);
    }
  }
  json manifest = json::array();
  for (size_t i = 0; i < picks.size(); ++i) {
    const pslab::SampleRef& ref = picks[i];
    const pslab::LabeledSample sample = pslab::generate_sample(cfg.synth, ref);
    const std::string id = ref.id(cfg.synth);
    const pslab::MaskNet::Prediction pred = model.predict(sample.image);

    json entry;
    entry["id"] = id;
    entry["label"] = sample.live ? "live" : "spoof";
    entry["score"] = pred.score;
    entry["files"] = json::array();
    const std::string input_file = id + "_input.ppm";
    pslab::write_ppm((fs::path(cfg.output_dir) / input_file).string(), sample.image);
    entry["files"].push_back(input_file);
    for (size_t k = 0; k < pred.masks.scales.size(); ++k) {
      const std::string mask_file = id + "_m" + std::to_string(pred.masks.scales[k]) + ".pgm";
      pslab::write_pgm((fs::path(cfg.output_dir) / mask_file).string(),
                       upsample_nearest(pred.masks.maps[k], cfg.synth.image_side));
      entry["files"].push_back(mask_file);
    }
    manifest.push_back(entry);
  }
  write_text(fs::path(cfg.output_dir) / "manifest.json", manifest.dump(2) + "\n");
  note(opts, "wrote " + std::to_string(picks.size()) + " visualization(s) to " + cfg.output_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pyramid pixel-wise supervision toolkit"};
  app.require_subcommand(1);

  CliOptions opts;
  auto add_common = [&](CLI::App* cmd, bool with_checkpoint) {
    cmd->add_option("--config", opts.config_path, "run configuration JSON")->required();
    cmd->add_option("--seed", opts.seed_override, "override every seed in the config");
    cmd->add_option("--out", opts.out_override, "override output_dir");
    cmd->add_option("--scales", opts.scales_override, "override model scales, e.g. 8,4,2,1");
    cmd->add_flag("--quiet", opts.quiet, "suppress progress output");
    if (with_checkpoint)
      cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint directory");
  };

  CLI::App* synth = app.add_subcommand("synth", "export a synthetic dataset");
  add_common(synth, false);
  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train, false);
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, true);
  CLI::App* ablate = app.add_subcommand("ablate", "compare pyramid scale sets");
  add_common(ablate, false);
  CLI::App* visualize = app.add_subcommand("visualize", "dump predicted mask pyramids");
  add_common(visualize, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(opts);
    if (train->parsed()) return cmd_train(opts);
    if (eval->parsed()) return cmd_eval(opts);
    if (ablate->parsed()) return cmd_ablate(opts);
    if (visualize->parsed()) return cmd_visualize(opts);
    return 2;
  } catch (const pslab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pslab::ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 3;
  } catch (const pslab::ModeError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
