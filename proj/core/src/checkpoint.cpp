#include "pslab/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace pslab {

namespace fs = std::filesystem;

void save_checkpoint(const std::string& dir, const std::string& kind,
                     const std::string& config_json, std::uint64_t seed, int epoch,
                     const ModelParameters& params) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = kind;
  manifest["config"] = nlohmann::json::parse(config_json);
  manifest["seed"] = seed;
  manifest["epoch"] = epoch;
  manifest["params"] = nlohmann::json::array();
  for (const auto& item : params) {
    nlohmann::json p;
    p["name"] = item.name;
    p["shape"] = item.tensor.shape();
    manifest["params"].push_back(p);
    save_tensor((fs::path(dir) / (item.name + ".pslt")).string(), item.tensor);
  }
  std::ofstream f(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint manifest under " + dir);
  f << manifest.dump(2) << "\n";
}

CheckpointInfo load_checkpoint_info(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "manifest.json", std::ios::binary);
  if (!f) throw IoError("no checkpoint manifest under " + dir);
  nlohmann::json manifest;
  try {
    f >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint manifest: " + std::string(e.what()));
  }
  CheckpointInfo info;
  info.kind = manifest.at("kind").get<std::string>();
  info.config_json = manifest.at("config").dump();
  info.seed = manifest.at("seed").get<std::uint64_t>();
  info.epoch = manifest.at("epoch").get<int>();
  for (const auto& p : manifest.at("params")) {
    info.params.emplace_back(p.at("name").get<std::string>(), p.at("shape").get<Shape>());
  }
  return info;
}

void load_checkpoint_params(const std::string& dir, ModelParameters& params) {
  const CheckpointInfo info = load_checkpoint_info(dir);
  PSLAB_CHECK_SHAPE(info.params.size() == params.size(),
                    "checkpoint holds " << info.params.size() << " parameters, model expects "
                                        << params.size());
  for (const auto& [name, shape] : info.params) {
    Tensor& dst = params.at(name);
    PSLAB_CHECK_SHAPE(dst.shape() == shape, "checkpoint parameter " << name << " has shape "
                                                                    << shape_str(shape)
                                                                    << ", model expects "
                                                                    << shape_str(dst.shape()));
    Tensor loaded = load_tensor((fs::path(dir) / (name + ".pslt")).string());
    PSLAB_CHECK_SHAPE(loaded.shape() == shape, "checkpoint tensor file mismatches manifest for " << name);
    const bool rg = dst.requires_grad();
    dst = std::move(loaded);
    dst.set_requires_grad(rg);
  }
}

}  // namespace pslab
