#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pslab/checkpoint.hpp"
#include "pslab/image_io.hpp"
#include "pslab/runconfig.hpp"

using namespace pslab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* cli_path() { return PSLAB_CLI_PATH; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string tiny_config(int train, int dev, int test, int epochs, const std::string& model_kind,
                        const std::string& out_dir) {
  json j;
  j["synth"]["seed"] = 12;
  j["synth"]["counts"]["train"] = train;
  j["synth"]["counts"]["dev"] = dev;
  j["synth"]["counts"]["test"] = test;
  j["model"]["kind"] = model_kind;
  j["model"]["seed"] = 3;
  if (model_kind == "depth") j["model"]["scales"] = {32, 16};
  j["optim"]["epochs"] = epochs;
  j["optim"]["batch_size"] = 8;
  if (model_kind == "depth") j["optim"]["kind"] = "adam";
  j["output_dir"] = out_dir;
  return j.dump(2);
}

}  // namespace

TEST_CASE("cli: synth exports the configured counts and is idempotent") {
  const fs::path dir = fresh_dir("pslab_cli_synth");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(8, 4, 4, 1, "mask", (dir / "data").string()));

  REQUIRE(run_cli("synth --config " + cfg.string()) == 0);
  int rows = 0;
  std::istringstream index(slurp(dir / "data" / "train" / "index.csv"));
  std::string line;
  std::getline(index, line);  // header
  while (std::getline(index, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8);

  // pick one artifact of each kind, re-run, compare bytes
  fs::path some_ppm, some_pgm;
  for (const auto& e : fs::directory_iterator(dir / "data" / "train")) {
    if (e.path().extension() == ".ppm") some_ppm = e.path();
    if (e.path().extension() == ".pgm") some_pgm = e.path();
  }
  REQUIRE(!some_ppm.empty());
  const std::string ppm_before = slurp(some_ppm);
  const std::string pgm_before = slurp(some_pgm);
  REQUIRE(run_cli("synth --config " + cfg.string()) == 0);
  CHECK(slurp(some_ppm) == ppm_before);
  CHECK(slurp(some_pgm) == pgm_before);
}

TEST_CASE("cli: invalid attack type in config exits 2 and names the key") {
  const fs::path dir = fresh_dir("pslab_cli_badcfg");
  const fs::path cfg = dir / "cfg.json";
  json j = json::parse(tiny_config(8, 4, 4, 1, "mask", (dir / "data").string()));
  j["synth"]["attack_types"] = {"print", "hologram"};
  write_file(cfg, j.dump());
  const std::string cmd = std::string(cli_path()) + " synth --config " + cfg.string() + " 2>" +
                          (dir / "err.txt").string() + " >/dev/null";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 2);
  const std::string err = slurp(dir / "err.txt");
  CHECK(err.find("attack_types") != std::string::npos);
  CHECK(err.find("hologram") != std::string::npos);
}

TEST_CASE("cli: unknown config keys exit 2") {
  const fs::path dir = fresh_dir("pslab_cli_unknown");
  const fs::path cfg = dir / "cfg.json";
  json j = json::parse(tiny_config(8, 4, 4, 1, "mask", (dir / "data").string()));
  j["synht"] = json::object();  // typo section
  write_file(cfg, j.dump());
  CHECK(run_cli("synth --config " + cfg.string()) == 2);
}

TEST_CASE("cli: train then eval, resolved config echo re-parses equal") {
  const fs::path dir = fresh_dir("pslab_cli_train");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(16, 8, 8, 1, "mask", (dir / "run").string()));

  const auto t0 = std::chrono::steady_clock::now();
  REQUIRE(run_cli("train --config " + cfg.string()) == 0);
  // smoke training stays far inside the documented 5-minute single-core bound
  CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 300.0);
  CHECK(fs::exists(dir / "run" / "checkpoint" / "manifest.json"));
  CHECK(fs::exists(dir / "run" / "trainlog.jsonl"));

  const std::string echoed = slurp(dir / "run" / "config.json");
  const RunConfig parsed = parse_run_config(echoed);
  CHECK(run_config_to_json(parsed) + "\n" == echoed);

  REQUIRE(run_cli("eval --config " + cfg.string() + " --checkpoint " +
                  (dir / "run" / "checkpoint").string() + " --out " + (dir / "eval").string()) == 0);
  CHECK(fs::exists(dir / "eval" / "report.json"));
  CHECK(fs::exists(dir / "eval" / "scores_test.csv"));
  const json report = json::parse(slurp(dir / "eval" / "report.json"));
  CHECK(report.contains("acer_percent"));
  CHECK(report["model_kind"] == "mask");
}

TEST_CASE("cli: eval determinism produces byte-identical artifacts") {
  const fs::path dir = fresh_dir("pslab_cli_determ");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(12, 6, 6, 1, "mask", (dir / "run").string()));
  REQUIRE(run_cli("train --config " + cfg.string()) == 0);
  const std::string ckpt = (dir / "run" / "checkpoint").string();

  REQUIRE(run_cli("eval --config " + cfg.string() + " --checkpoint " + ckpt + " --out " +
                  (dir / "e1").string()) == 0);
  REQUIRE(run_cli("eval --config " + cfg.string() + " --checkpoint " + ckpt + " --out " +
                  (dir / "e2").string()) == 0);
  CHECK(slurp(dir / "e1" / "report.json") == slurp(dir / "e2" / "report.json"));
  CHECK(slurp(dir / "e1" / "scores_test.csv") == slurp(dir / "e2" / "scores_test.csv"));
  CHECK(slurp(dir / "e1" / "scores_dev.csv") == slurp(dir / "e2" / "scores_dev.csv"));
}

TEST_CASE("cli: mismatched checkpoint exits 3") {
  const fs::path dir = fresh_dir("pslab_cli_mismatch");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(12, 6, 6, 1, "mask", (dir / "run").string()));
  REQUIRE(run_cli("train --config " + cfg.string()) == 0);

  // same checkpoint, different image side in the eval config
  json j = json::parse(tiny_config(12, 6, 6, 1, "mask", (dir / "eval").string()));
  j["synth"]["image_side"] = 32;
  j["model"]["input_side"] = 32;
  j["model"]["scales"] = {4, 2, 1};
  const fs::path cfg2 = dir / "cfg2.json";
  write_file(cfg2, j.dump());
  CHECK(run_cli("eval --config " + cfg2.string() + " --checkpoint " +
                (dir / "run" / "checkpoint").string()) == 3);
}

TEST_CASE("cli: depth checkpoints evaluate but do not visualize") {
  const fs::path dir = fresh_dir("pslab_cli_vis4");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(8, 4, 4, 1, "depth", (dir / "run").string()));
  REQUIRE(run_cli("train --config " + cfg.string()) == 0);
  CHECK(run_cli("eval --config " + cfg.string() + " --checkpoint " +
                (dir / "run" / "checkpoint").string() + " --out " + (dir / "ev").string()) == 0);
  const json report = json::parse(slurp(dir / "ev" / "report.json"));
  CHECK(report["model_kind"] == "depth");
  CHECK(run_cli("visualize --config " + cfg.string() + " --checkpoint " +
                (dir / "run" / "checkpoint").string() + " --out " + (dir / "vis").string()) == 4);
}

TEST_CASE("cli: visualize with a constant-0.5 stub writes mid-gray maps") {
  const fs::path dir = fresh_dir("pslab_cli_vis");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(8, 4, 4, 1, "mask", (dir / "vis").string()));

  // zeroed heads and classifier produce exactly 0.5 everywhere
  MaskNetConfig net_cfg;
  MaskNet stub(net_cfg, 3);
  for (auto& item : stub.params())
    if (item.name.rfind("head", 0) == 0 || item.name.rfind("cls", 0) == 0)
      for (std::int64_t i = 0; i < item.tensor.numel(); ++i) item.tensor[i] = 0.0;
  ModelConfig mc;
  mc.kind = "mask";
  mc.seed = 3;
  mc.mask = net_cfg;
  const fs::path ckpt = dir / "stub_ckpt";
  save_checkpoint(ckpt.string(), "mask", model_config_to_json(mc), 3, 0, stub.params());

  REQUIRE(run_cli("visualize --config " + cfg.string() + " --checkpoint " + ckpt.string()) == 0);
  const json manifest = json::parse(slurp(dir / "vis" / "manifest.json"));
  REQUIRE(manifest.is_array());
  REQUIRE(manifest.size() == 4);
  for (const auto& entry : manifest) {
    CHECK(entry.contains("score"));
    CHECK(entry["score"].get<double>() == 0.5);
    REQUIRE(entry["files"].size() == 5);  // input + 4 scales
  }
  // 255 * 0.5 = 127.5 rounds half-up to 128
  const std::string m8 = manifest[0]["files"][1].get<std::string>();
  const Tensor img = read_pgm((dir / "vis" / m8).string());
  for (std::int64_t i = 0; i < img.numel(); ++i)
    CHECK(img[i] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));

  // nearest-neighbour upsampling keeps the 64 pyramid cells distinct: the
  // upsampled map is constant within each 8x8 block
  const json files = manifest[0]["files"];
  const Tensor m8_img = read_pgm((dir / "vis" / files[1].get<std::string>()).string());
  REQUIRE(m8_img.shape() == Shape{64, 64});
  int blocks = 0;
  for (int by = 0; by < 8; ++by)
    for (int bx = 0; bx < 8; ++bx) {
      const double v = m8_img.at({by * 8, bx * 8});
      bool constant = true;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) constant &= m8_img.at({by * 8 + y, bx * 8 + x}) == v;
      blocks += constant;
    }
  CHECK(blocks == 64);
}

TEST_CASE("cli: ablate writes one row per scale set with shared seeds") {
  const fs::path dir = fresh_dir("pslab_cli_ablate");
  const fs::path cfg_path = dir / "cfg.json";
  json j = json::parse(tiny_config(12, 6, 6, 1, "mask", (dir / "ab").string()));
  j["ablate"]["scale_sets"] = {{8}, {8, 4, 2, 1}};
  j["ablate"]["seeds"] = {5};
  write_file(cfg_path, j.dump());

  REQUIRE(run_cli("ablate --config " + cfg_path.string()) == 0);
  const json rows = json::parse(slurp(dir / "ab" / "ablation.json"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["seeds"] == json::array({5}));
  CHECK(rows[1]["seeds"] == json::array({5}));
  CHECK(rows[0]["scales"] == json::array({8}));
  CHECK(rows[0]["acer_std_percent"].get<double>() == 0.0);  // single seed
  const std::string csv = slurp(dir / "ab" / "ablation.csv");
  CHECK(csv.find("label_kind,scales,seeds,acer_mean_percent,acer_std_percent") == 0);
  CHECK(csv.find("mask,8,") != std::string::npos);
  CHECK(csv.find("mask,8x4x2x1,") != std::string::npos);

  // fewer than two scale sets exits 2
  j["ablate"]["scale_sets"] = {{8}};
  write_file(cfg_path, j.dump());
  CHECK(run_cli("ablate --config " + cfg_path.string()) == 2);
}

TEST_CASE("cli: depth ablate mirrors the mask/depth table structure") {
  const fs::path dir = fresh_dir("pslab_cli_ablate_depth");
  const fs::path cfg_path = dir / "cfg.json";
  json j = json::parse(tiny_config(8, 4, 4, 1, "depth", (dir / "ab").string()));
  j["ablate"]["label_kind"] = "depth";
  j["ablate"]["scale_sets"] = {{32}, {32, 16}};
  j["ablate"]["seeds"] = {4};
  write_file(cfg_path, j.dump());
  REQUIRE(run_cli("ablate --config " + cfg_path.string()) == 0);
  const json rows = json::parse(slurp(dir / "ab" / "ablation.json"));
  REQUIRE(rows.size() == 2);
  CHECK(rows[0]["label_kind"] == "depth");
}

TEST_CASE("cli: cross-domain protocol flows through train and eval") {
  const fs::path dir = fresh_dir("pslab_cli_xdomain");
  const fs::path cfg = dir / "cfg.json";
  json j = json::parse(tiny_config(12, 6, 6, 1, "mask", (dir / "run").string()));
  j["protocol"]["kind"] = "cross_domain";
  j["protocol"]["held_out"] = "night";
  write_file(cfg, j.dump());
  REQUIRE(run_cli("train --config " + cfg.string()) == 0);
  REQUIRE(run_cli("eval --config " + cfg.string() + " --checkpoint " +
                  (dir / "run" / "checkpoint").string() + " --out " + (dir / "ev").string()) == 0);
  const json report = json::parse(slurp(dir / "ev" / "report.json"));
  CHECK(report["protocol"] == "cross_domain");
  CHECK(report["held_out"] == "night");
  CHECK(report.contains("hter_percent"));
  CHECK(report.contains("auc_percent"));

  // unknown held-out domain is a config error
  j["protocol"]["held_out"] = "moonbase";
  write_file(cfg, j.dump());
  CHECK(run_cli("train --config " + cfg.string()) == 2);
}

TEST_CASE("cli: missing config and bad flags exit 2") {
  CHECK(run_cli("train") == 2);
  CHECK(run_cli("synth --config /nonexistent/cfg.json") == 2);
  CHECK(run_cli("eval --config /nonexistent/cfg.json") == 2);

  const fs::path dir = fresh_dir("pslab_cli_badscales");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(8, 4, 4, 1, "mask", (dir / "run").string()));
  CHECK(run_cli("synth --config " + cfg.string() + " --scales 7,3") == 2);
}

TEST_CASE("run config picks optimizer defaults from the model family") {
  const RunConfig mask_cfg = parse_run_config(R"({"model": {"kind": "mask"}})");
  CHECK(mask_cfg.optim.kind == OptimKind::sgd);
  CHECK(mask_cfg.optim.lr == doctest::Approx(1e-3));
  CHECK(mask_cfg.optim.momentum == doctest::Approx(0.9));

  const RunConfig depth_cfg = parse_run_config(R"({"model": {"kind": "depth"}})");
  CHECK(depth_cfg.optim.kind == OptimKind::adam);
  CHECK(depth_cfg.optim.lr == doctest::Approx(1e-4));
  CHECK(depth_cfg.optim.lr_halve_epoch == 500);

  // explicit settings still win
  const RunConfig custom = parse_run_config(
      R"({"model": {"kind": "depth"}, "optim": {"kind": "sgd", "lr": 0.01}})");
  CHECK(custom.optim.kind == OptimKind::sgd);
  CHECK(custom.optim.lr == doctest::Approx(0.01));
}

TEST_CASE("cli: --seed and --scales overrides reach the resolved config") {
  const fs::path dir = fresh_dir("pslab_cli_override");
  const fs::path cfg = dir / "cfg.json";
  write_file(cfg, tiny_config(8, 4, 4, 1, "mask", (dir / "d1").string()));
  REQUIRE(run_cli("synth --config " + cfg.string() + " --seed 777 --scales 8,4 --out " +
                  (dir / "d2").string()) == 0);
  const RunConfig echoed = parse_run_config(slurp(dir / "d2" / "config.json"));
  CHECK(echoed.synth.seed == 777);
  CHECK(echoed.model.mask.scales == std::vector<int>{8, 4});
  CHECK(echoed.output_dir == (dir / "d2").string());
}
