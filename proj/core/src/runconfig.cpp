#include "pslab/runconfig.hpp"

#include <fstream>
#include <initializer_list>

#include <json.hpp>

namespace pslab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key '" + section + "." + key + "' in config");
  }
}

template <typename T>
void read_field(const json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + section + "." + std::string(key) + "'");
  }
}

void parse_synth(const json& j, SynthConfig& out) {
  check_keys(j, "synth", {"seed", "image_side", "domains", "attack_types", "counts"});
  read_field(j, "synth", "seed", out.seed);
  read_field(j, "synth", "image_side", out.image_side);
  if (j.contains("domains")) {
    if (!j.at("domains").is_array()) throw ConfigError("synth.domains must be an array");
    out.domains.clear();
    for (const auto& dj : j.at("domains")) {
      check_keys(dj, "synth.domains[]", {"name", "gain", "cast", "noise"});
      DomainPreset d;
      read_field(dj, "synth.domains[]", "name", d.name);
      read_field(dj, "synth.domains[]", "gain", d.gain);
      read_field(dj, "synth.domains[]", "cast", d.cast);
      read_field(dj, "synth.domains[]", "noise", d.noise);
      out.domains.push_back(std::move(d));
    }
  }
  if (j.contains("attack_types")) {
    if (!j.at("attack_types").is_array()) throw ConfigError("synth.attack_types must be an array");
    out.attack_types.clear();
    for (const auto& tj : j.at("attack_types")) {
      const std::string name = tj.is_string() ? tj.get<std::string>() : std::string();
      const auto t = attack_type_from_name(name);
      if (!t || *t == AttackType::none)
        throw ConfigError("synth.attack_types: unknown attack type '" + name + "'");
      out.attack_types.push_back(*t);
    }
  }
  if (j.contains("counts")) {
    const auto& cj = j.at("counts");
    check_keys(cj, "synth.counts", {"train", "dev", "test"});
    read_field(cj, "synth.counts", "train", out.counts.train);
    read_field(cj, "synth.counts", "dev", out.counts.dev);
    read_field(cj, "synth.counts", "test", out.counts.test);
  }
  out.validate();
}

void parse_model(const json& j, ModelConfig& out) {
  check_keys(j, "model",
             {"kind", "seed", "input_side", "feature_channels", "scales", "theta"});
  read_field(j, "model", "kind", out.kind);
  read_field(j, "model", "seed", out.seed);
  read_field(j, "model", "input_side", out.mask.input_side);
  out.depth.input_side = out.mask.input_side;
  read_field(j, "model", "feature_channels", out.mask.feature_channels);
  read_field(j, "model", "theta", out.depth.theta);
  if (j.contains("scales")) {
    std::vector<int> scales;
    read_field(j, "model", "scales", scales);
    if (out.kind == "depth")
      out.depth.scales = scales;
    else
      out.mask.scales = scales;
  }
  out.validate();
}

void parse_optim(const json& j, OptimConfig& out) {
  check_keys(j, "optim",
             {"kind", "lr", "momentum", "weight_decay", "epochs", "batch_size", "lr_halve_epoch",
              "seed"});
  if (j.contains("kind")) {
    const std::string kind = j.at("kind").is_string() ? j.at("kind").get<std::string>() : "";
    if (kind == "sgd")
      out.kind = OptimKind::sgd;
    else if (kind == "adam")
      out.kind = OptimKind::adam;
    else
      throw ConfigError("optim.kind must be 'sgd' or 'adam'");
  }
  read_field(j, "optim", "lr", out.lr);
  read_field(j, "optim", "momentum", out.momentum);
  read_field(j, "optim", "weight_decay", out.weight_decay);
  read_field(j, "optim", "epochs", out.epochs);
  read_field(j, "optim", "batch_size", out.batch_size);
  if (j.contains("lr_halve_epoch") && !j.at("lr_halve_epoch").is_null()) {
    int e = 0;
    read_field(j, "optim", "lr_halve_epoch", e);
    out.lr_halve_epoch = e;
  }
  read_field(j, "optim", "seed", out.seed);
  out.validate();
}

void parse_loss(const json& j, LossConfig& out) {
  check_keys(j, "loss", {"reduction", "binary_weight"});
  if (j.contains("reduction")) {
    const std::string r = j.at("reduction").is_string() ? j.at("reduction").get<std::string>() : "";
    if (r == "mean")
      out.reduction = ops::Reduction::mean;
    else if (r == "sum")
      out.reduction = ops::Reduction::sum;
    else
      throw ConfigError("loss.reduction must be 'mean' or 'sum'");
  }
  read_field(j, "loss", "binary_weight", out.binary_weight);
  if (out.binary_weight < 0.0) throw ConfigError("loss.binary_weight must be non-negative");
}

void parse_protocol(const json& j, ProtocolConfig& out) {
  check_keys(j, "protocol", {"kind", "held_out"});
  if (j.contains("kind")) {
    const std::string k = j.at("kind").is_string() ? j.at("kind").get<std::string>() : "";
    const auto kind = protocol_kind_from_name(k);
    if (!kind) throw ConfigError("protocol.kind must be intra, cross_type_loo or cross_domain");
    out.kind = *kind;
  }
  read_field(j, "protocol", "held_out", out.held_out);
  if (out.kind != ProtocolKind::intra && out.held_out.empty())
    throw ConfigError("protocol.held_out is required for " +
                      std::string(protocol_kind_name(out.kind)));
}

void parse_metrics(const json& j, MetricsConfig& out) {
  check_keys(j, "metrics", {"threshold_policy", "fixed_threshold"});
  if (j.contains("threshold_policy")) {
    const std::string p =
        j.at("threshold_policy").is_string() ? j.at("threshold_policy").get<std::string>() : "";
    if (p == "dev_eer")
      out.policy = MetricsConfig::ThresholdPolicy::dev_eer;
    else if (p == "fixed")
      out.policy = MetricsConfig::ThresholdPolicy::fixed;
    else
      throw ConfigError("metrics.threshold_policy must be 'dev_eer' or 'fixed'");
  }
  read_field(j, "metrics", "fixed_threshold", out.fixed_threshold);
}

void parse_ablate(const json& j, AblateConfig& out) {
  check_keys(j, "ablate", {"label_kind", "scale_sets", "seeds"});
  read_field(j, "ablate", "label_kind", out.label_kind);
  if (out.label_kind != "mask" && out.label_kind != "depth")
    throw ConfigError("ablate.label_kind must be 'mask' or 'depth'");
  read_field(j, "ablate", "scale_sets", out.scale_sets);
  read_field(j, "ablate", "seeds", out.seeds);
  if (j.contains("seeds") && out.seeds.empty()) throw ConfigError("ablate.seeds must not be empty");
}

void parse_visualize(const json& j, VisualizeConfig& out) {
  check_keys(j, "visualize", {"count"});
  read_field(j, "visualize", "count", out.count);
  if (out.count < 1) throw ConfigError("visualize.count must be positive");
}

}  // namespace

void ModelConfig::validate() const {
  if (kind != "mask" && kind != "depth" && kind != "spp")
    throw ConfigError("model.kind must be 'mask', 'depth' or 'spp'");
  if (kind == "depth")
    depth.validate();
  else
    mask.validate();
}

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "<root>",
             {"synth", "model", "optim", "loss", "protocol", "metrics", "ablate", "visualize",
              "output_dir"});
  RunConfig cfg;
  if (j.contains("synth")) parse_synth(j.at("synth"), cfg.synth);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  // Optimizer defaults follow the model family: SGD for mask/spp nets,
  // Adam (with the reference halving epoch) for depth nets.
  cfg.optim = cfg.model.kind == "depth" ? OptimConfig::depth_defaults() : OptimConfig::mask_defaults();
  if (j.contains("optim")) parse_optim(j.at("optim"), cfg.optim);
  if (j.contains("loss")) parse_loss(j.at("loss"), cfg.loss);
  if (j.contains("protocol")) parse_protocol(j.at("protocol"), cfg.protocol);
  if (j.contains("metrics")) parse_metrics(j.at("metrics"), cfg.metrics);
  if (j.contains("ablate")) parse_ablate(j.at("ablate"), cfg.ablate);
  if (j.contains("visualize")) parse_visualize(j.at("visualize"), cfg.visualize);
  read_field(j, "<root>", "output_dir", cfg.output_dir);
  if (cfg.output_dir.empty()) throw ConfigError("output_dir must not be empty");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_run_config(text);
}

ModelConfig parse_model_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config is not valid JSON: ") + e.what());
  }
  ModelConfig cfg;
  parse_model(j, cfg);
  return cfg;
}

std::string model_config_to_json(const ModelConfig& cfg) {
  json j;
  j["kind"] = cfg.kind;
  j["seed"] = cfg.seed;
  j["input_side"] = cfg.mask.input_side;
  j["feature_channels"] = cfg.mask.feature_channels;
  j["theta"] = cfg.depth.theta;
  j["scales"] = cfg.kind == "depth" ? cfg.depth.scales : cfg.mask.scales;
  return j.dump();
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["synth"]["seed"] = cfg.synth.seed;
  j["synth"]["image_side"] = cfg.synth.image_side;
  j["synth"]["domains"] = json::array();
  for (const auto& d : cfg.synth.domains) {
    json dj;
    dj["name"] = d.name;
    dj["gain"] = d.gain;
    dj["cast"] = d.cast;
    dj["noise"] = d.noise;
    j["synth"]["domains"].push_back(dj);
  }
  j["synth"]["attack_types"] = json::array();
  for (AttackType t : cfg.synth.attack_types) j["synth"]["attack_types"].push_back(attack_type_name(t));
  j["synth"]["counts"]["train"] = cfg.synth.counts.train;
  j["synth"]["counts"]["dev"] = cfg.synth.counts.dev;
  j["synth"]["counts"]["test"] = cfg.synth.counts.test;

  j["model"] = json::parse(model_config_to_json(cfg.model));

  j["optim"]["kind"] = cfg.optim.kind == OptimKind::sgd ? "sgd" : "adam";
  j["optim"]["lr"] = cfg.optim.lr;
  j["optim"]["momentum"] = cfg.optim.momentum;
  j["optim"]["weight_decay"] = cfg.optim.weight_decay;
  j["optim"]["epochs"] = cfg.optim.epochs;
  j["optim"]["batch_size"] = cfg.optim.batch_size;
  if (cfg.optim.lr_halve_epoch)
    j["optim"]["lr_halve_epoch"] = *cfg.optim.lr_halve_epoch;
  else
    j["optim"]["lr_halve_epoch"] = nullptr;
  j["optim"]["seed"] = cfg.optim.seed;

  j["loss"]["reduction"] = cfg.loss.reduction == ops::Reduction::mean ? "mean" : "sum";
  j["loss"]["binary_weight"] = cfg.loss.binary_weight;

  j["protocol"]["kind"] = protocol_kind_name(cfg.protocol.kind);
  j["protocol"]["held_out"] = cfg.protocol.held_out;

  j["metrics"]["threshold_policy"] =
      cfg.metrics.policy == MetricsConfig::ThresholdPolicy::dev_eer ? "dev_eer" : "fixed";
  j["metrics"]["fixed_threshold"] = cfg.metrics.fixed_threshold;

  j["ablate"]["label_kind"] = cfg.ablate.label_kind;
  j["ablate"]["scale_sets"] = cfg.ablate.scale_sets;
  j["ablate"]["seeds"] = cfg.ablate.seeds;

  j["visualize"]["count"] = cfg.visualize.count;

  j["output_dir"] = cfg.output_dir;
  return j.dump(2);
}

}  // namespace pslab
