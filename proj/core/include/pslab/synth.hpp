#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pslab/labels.hpp"
#include "pslab/tensor.hpp"

namespace pslab {

enum class AttackType { none, print, replay, partial_print, partial_mask };

const char* attack_type_name(AttackType t);
std::optional<AttackType> attack_type_from_name(const std::string& name);
bool is_partial(AttackType t);

// Rendering preset standing in for one capture environment.
struct DomainPreset {
  std::string name;
  double gain = 1.0;               // illumination gain
  std::array<double, 3> cast{1.0, 1.0, 1.0};  // per-channel color cast
  double noise = 0.02;             // sensor noise amplitude
};

std::vector<DomainPreset> default_domains();

struct SplitCounts {
  int train = 2000;
  int dev = 400;
  int test = 500;
};

struct SynthConfig {
  std::uint64_t seed = 7;
  int image_side = 64;
  std::vector<DomainPreset> domains = default_domains();
  std::vector<AttackType> attack_types{AttackType::print, AttackType::replay,
                                       AttackType::partial_print, AttackType::partial_mask};
  SplitCounts counts;

  void validate() const;
  int domain_index(const std::string& name) const;  // -1 when absent
  bool type_enabled(AttackType t) const;
};

// Identity of one procedural sample; generation is a pure function of
// (config, ref).
struct SampleRef {
  int domain = 0;
  AttackType type = AttackType::none;
  std::uint32_t index = 0;

  std::string id(const SynthConfig& cfg) const;
};

struct LabeledSample {
  Tensor image;  // [3,S,S], values quantized to 255ths so PPM export is lossless
  bool live = false;
  MaskLabel mask;       // S x S, 1 = live pixel
  Tensor depth;         // [32,32]; max 1 for live, all zero for spoof
  AttackType attack_type = AttackType::none;
  std::string domain;
  // Attack rectangle for partial types (x, y, width, height); zero for
  // full-frame samples.
  int patch_x = 0, patch_y = 0, patch_w = 0, patch_h = 0;
};

LabeledSample generate_sample(const SynthConfig& cfg, const SampleRef& ref);

enum class ProtocolKind { intra, cross_type_loo, cross_domain };

const char* protocol_kind_name(ProtocolKind k);
std::optional<ProtocolKind> protocol_kind_from_name(const std::string& name);

struct ProtocolSplit {
  ProtocolKind kind = ProtocolKind::intra;
  std::string held_out;  // attack type (cross_type_loo) or domain (cross_domain)
  std::vector<SampleRef> train, dev, test;
};

// Builds seeded, disjoint splits honoring the protocol's constraints:
// cross_type_loo keeps the held-out attack type exclusively in test,
// cross_domain keeps the held-out domain exclusively in test. Train splits
// are class-balanced.
ProtocolSplit build_protocol(const SynthConfig& cfg, ProtocolKind kind,
                             const std::string& held_out = "");

// One directory per split with PPM images, PGM masks, depth tensors and an
// index CSV (id,label,attack_type,domain,fold).
void export_split(const SynthConfig& cfg, const ProtocolSplit& split, const std::string& out_dir);

}  // namespace pslab
