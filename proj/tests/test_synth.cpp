#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "pslab/image_io.hpp"
#include "pslab/synth.hpp"

using namespace pslab;

namespace {

SynthConfig tiny_config() {
  SynthConfig cfg;
  cfg.seed = 99;
  cfg.counts = {40, 12, 16};
  return cfg;
}

std::string sample_fingerprint(const LabeledSample& s) {
  std::ostringstream oss;
  write_tensor(oss, s.image);
  write_tensor(oss, s.depth);
  for (auto v : s.mask.values) oss << int(v);
  return oss.str();
}

}  // namespace

TEST_CASE("live samples carry an all-ones mask and a unit-peak depth map") {
  const SynthConfig cfg = tiny_config();
  for (std::uint32_t i = 0; i < 4; ++i) {
    const LabeledSample s = generate_sample(cfg, {0, AttackType::none, i});
    CHECK(s.live);
    for (auto v : s.mask.values) CHECK(v == 1);
    double maxd = 0.0;
    for (std::int64_t k = 0; k < s.depth.numel(); ++k) {
      CHECK(s.depth[k] >= 0.0);
      CHECK(s.depth[k] <= 1.0);
      maxd = std::max(maxd, s.depth[k]);
    }
    CHECK(maxd == 1.0);
  }
}

TEST_CASE("full-frame attacks carry zero masks and zero depth") {
  const SynthConfig cfg = tiny_config();
  for (AttackType t : {AttackType::print, AttackType::replay}) {
    const LabeledSample s = generate_sample(cfg, {1, t, 0});
    CHECK(!s.live);
    for (auto v : s.mask.values) CHECK(v == 0);
    for (std::int64_t k = 0; k < s.depth.numel(); ++k) CHECK(s.depth[k] == 0.0);
  }
}

TEST_CASE("partial attacks zero the mask exactly on the recorded patch") {
  const SynthConfig cfg = tiny_config();
  for (AttackType t : {AttackType::partial_print, AttackType::partial_mask}) {
    for (std::uint32_t i = 0; i < 6; ++i) {
      const LabeledSample s = generate_sample(cfg, {2, t, i});
      CHECK(!s.live);
      CHECK(s.patch_w >= cfg.image_side / 4);
      CHECK(s.patch_w <= cfg.image_side / 2);
      CHECK(s.patch_h >= cfg.image_side / 4);
      CHECK(s.patch_h <= cfg.image_side / 2);
      int zeros = 0;
      for (int y = 0; y < cfg.image_side; ++y)
        for (int x = 0; x < cfg.image_side; ++x) {
          const bool inside = x >= s.patch_x && x < s.patch_x + s.patch_w && y >= s.patch_y &&
                              y < s.patch_y + s.patch_h;
          CHECK(s.mask.at(y, x) == (inside ? 0 : 1));
          zeros += s.mask.at(y, x) == 0;
        }
      CHECK(zeros == s.patch_w * s.patch_h);
    }
  }
}

TEST_CASE("generation is bitwise deterministic") {
  const SynthConfig cfg = tiny_config();
  const SampleRef ref{1, AttackType::replay, 7};
  CHECK(sample_fingerprint(generate_sample(cfg, ref)) ==
        sample_fingerprint(generate_sample(cfg, ref)));
}

TEST_CASE("image values are quantized to 255ths (lossless PPM export)") {
  namespace fs = std::filesystem;
  const SynthConfig cfg = tiny_config();
  const LabeledSample s = generate_sample(cfg, {0, AttackType::print, 3});
  const fs::path dir = fs::temp_directory_path() / "pslab_synth_test";
  fs::create_directories(dir);
  const std::string path = (dir / "img.ppm").string();
  write_ppm(path, s.image);
  const Tensor back = read_ppm(path);
  CHECK(back.values() == s.image.values());
  fs::remove_all(dir);
}

TEST_CASE("disabled attack types are rejected") {
  SynthConfig cfg = tiny_config();
  cfg.attack_types = {AttackType::print};
  CHECK_THROWS_AS(generate_sample(cfg, {0, AttackType::replay, 0}), ConfigError);
}

TEST_CASE("intra protocol: exact counts, balance, disjointness") {
  SynthConfig cfg = tiny_config();
  cfg.counts = {50, 10, 12};
  const ProtocolSplit split = build_protocol(cfg, ProtocolKind::intra);
  CHECK(split.train.size() == 50);
  CHECK(split.dev.size() == 10);
  CHECK(split.test.size() == 12);

  int live = 0;
  for (const auto& r : split.train) live += r.type == AttackType::none;
  CHECK(std::abs(live - 25) <= 3);  // within 10% of half

  std::set<std::string> seen;
  for (const auto* refs : {&split.train, &split.dev, &split.test})
    for (const auto& r : *refs) CHECK(seen.insert(r.id(cfg)).second);
}

TEST_CASE("cross_type_loo holds the attack type out of train and dev") {
  const SynthConfig cfg = tiny_config();
  const ProtocolSplit split = build_protocol(cfg, ProtocolKind::cross_type_loo, "replay");
  for (const auto* refs : {&split.train, &split.dev})
    for (const auto& r : *refs) CHECK(r.type != AttackType::replay);
  bool any_replay = false, any_other_attack = false;
  for (const auto& r : split.test) {
    any_replay |= r.type == AttackType::replay;
    any_other_attack |= r.type != AttackType::replay && r.type != AttackType::none;
  }
  CHECK(any_replay);
  CHECK(!any_other_attack);

  CHECK_THROWS_AS(build_protocol(cfg, ProtocolKind::cross_type_loo, "waxwork"), ConfigError);
  CHECK_THROWS_AS(build_protocol(cfg, ProtocolKind::cross_type_loo, ""), ConfigError);
}

TEST_CASE("cross_domain trains on exactly the other domains") {
  const SynthConfig cfg = tiny_config();
  const ProtocolSplit split = build_protocol(cfg, ProtocolKind::cross_domain, "night");
  const int held = cfg.domain_index("night");
  std::set<int> train_domains;
  for (const auto& r : split.train) {
    CHECK(r.domain != held);
    train_domains.insert(r.domain);
  }
  CHECK(train_domains.size() == cfg.domains.size() - 1);
  for (const auto& r : split.test) CHECK(r.domain == held);

  CHECK_THROWS_AS(build_protocol(cfg, ProtocolKind::cross_domain, "mars"), ConfigError);
}

TEST_CASE("protocol construction is deterministic") {
  const SynthConfig cfg = tiny_config();
  const ProtocolSplit a = build_protocol(cfg, ProtocolKind::cross_type_loo, "print");
  const ProtocolSplit b = build_protocol(cfg, ProtocolKind::cross_type_loo, "print");
  REQUIRE(a.train.size() == b.train.size());
  for (size_t i = 0; i < a.train.size(); ++i) CHECK(a.train[i].id(cfg) == b.train[i].id(cfg));
}

TEST_CASE("scalar label is consistent with the decomposed pyramid") {
  const SynthConfig cfg = tiny_config();
  const LabeledSample full = generate_sample(cfg, {0, AttackType::print, 0});
  const MaskPyramid fp = decompose_mask_pyramid(full.mask, {8, 4, 2, 1});
  CHECK(fp.maps.back()[0] == 0.0);

  const LabeledSample part = generate_sample(cfg, {0, AttackType::partial_print, 0});
  const MaskPyramid pp = decompose_mask_pyramid(part.mask, {8, 4, 2, 1});
  CHECK(pp.maps.back()[0] == 0.0);  // any-attack rule reaches 1x1
  bool mixed = false;
  for (std::int64_t i = 0; i < pp.maps[0].numel(); ++i) mixed |= pp.maps[0][i] == 1.0;
  CHECK(mixed);  // partial attacks keep live cells at the finest scale
}

TEST_CASE("domain presets realize a measurable shift") {
  const SynthConfig cfg = tiny_config();
  const int nd = static_cast<int>(cfg.domains.size());
  std::vector<std::array<double, 3>> means(static_cast<size_t>(nd), {0.0, 0.0, 0.0});
  const int per_domain = 6;
  for (int d = 0; d < nd; ++d) {
    for (std::uint32_t i = 0; i < per_domain; ++i) {
      const LabeledSample s = generate_sample(cfg, {d, AttackType::none, i});
      const std::int64_t plane = s.image.numel() / 3;
      for (int c = 0; c < 3; ++c) {
        double m = 0.0;
        for (std::int64_t k = 0; k < plane; ++k) m += s.image[c * plane + k];
        means[static_cast<size_t>(d)][static_cast<size_t>(c)] += m / plane / per_domain;
      }
    }
  }
  for (int a = 0; a < nd; ++a)
    for (int b = a + 1; b < nd; ++b) {
      double diff = 0.0;
      for (int c = 0; c < 3; ++c)
        diff += std::abs(means[static_cast<size_t>(a)][static_cast<size_t>(c)] -
                         means[static_cast<size_t>(b)][static_cast<size_t>(c)]);
      CHECK(diff / 3.0 >= 0.05);
    }
}

TEST_CASE("export writes one directory per split with an index CSV") {
  namespace fs = std::filesystem;
  SynthConfig cfg = tiny_config();
  cfg.counts = {8, 4, 4};
  const ProtocolSplit split = build_protocol(cfg, ProtocolKind::intra);
  const fs::path dir = fs::temp_directory_path() / "pslab_export_test";
  fs::remove_all(dir);
  export_split(cfg, split, dir.string());

  for (const char* fold : {"train", "dev", "test"}) {
    std::ifstream index(dir / fold / "index.csv");
    REQUIRE(index.good());
    std::string header;
    std::getline(index, header);
    CHECK(header == "id,label,attack_type,domain,fold");
    int rows = 0;
    std::string line;
    while (std::getline(index, line))
      if (!line.empty()) ++rows;
    CHECK(rows == (std::string(fold) == "train" ? 8 : 4));
  }
  const LabeledSample s0 = generate_sample(cfg, split.train[0]);
  const Tensor img = read_ppm((dir / "train" / (split.train[0].id(cfg) + ".ppm")).string());
  CHECK(img.values() == s0.image.values());
  fs::remove_all(dir);
}

TEST_CASE("synth config validation") {
  SynthConfig cfg = tiny_config();
  cfg.image_side = 20;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.domains.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.attack_types.push_back(AttackType::print);  // duplicate
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
