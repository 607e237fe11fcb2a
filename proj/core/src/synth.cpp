#include "pslab/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>

#include "pslab/image_io.hpp"
#include "pslab/prng.hpp"

namespace pslab {

const char* attack_type_name(AttackType t) {
  switch (t) {
    case AttackType::none: return "none";
    case AttackType::print: return "print";
    case AttackType::replay: return "replay";
    case AttackType::partial_print: return "partial_print";
    case AttackType::partial_mask: return "partial_mask";
  }
  return "?";
}

std::optional<AttackType> attack_type_from_name(const std::string& name) {
  for (AttackType t : {AttackType::none, AttackType::print, AttackType::replay,
                       AttackType::partial_print, AttackType::partial_mask})
    if (name == attack_type_name(t)) return t;
  return std::nullopt;
}

bool is_partial(AttackType t) {
  return t == AttackType::partial_print || t == AttackType::partial_mask;
}

const char* protocol_kind_name(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::intra: return "intra";
    case ProtocolKind::cross_type_loo: return "cross_type_loo";
    case ProtocolKind::cross_domain: return "cross_domain";
  }
  return "?";
}

std::optional<ProtocolKind> protocol_kind_from_name(const std::string& name) {
  for (ProtocolKind k : {ProtocolKind::intra, ProtocolKind::cross_type_loo, ProtocolKind::cross_domain})
    if (name == protocol_kind_name(k)) return k;
  return std::nullopt;
}

std::vector<DomainPreset> default_domains() {
  return {
      {"lab", 1.00, {1.00, 0.97, 0.93}, 0.015},
      {"office", 0.82, {1.06, 1.00, 0.90}, 0.025},
      {"daylight", 1.15, {0.93, 1.00, 1.07}, 0.020},
      {"night", 0.62, {0.97, 0.92, 1.10}, 0.040},
  };
}

void SynthConfig::validate() const {
  if (image_side < 16 || image_side % 8 != 0)
    throw ConfigError("synth.image_side must be a multiple of 8 and at least 16");
  if (domains.empty()) throw ConfigError("synth.domains must not be empty");
  for (size_t i = 0; i < domains.size(); ++i) {
    if (domains[i].name.empty()) throw ConfigError("synth.domains: empty domain name");
    for (size_t j = i + 1; j < domains.size(); ++j)
      if (domains[i].name == domains[j].name)
        throw ConfigError("synth.domains: duplicate domain name " + domains[i].name);
  }
  if (attack_types.empty()) throw ConfigError("synth.attack_types must not be empty");
  for (size_t i = 0; i < attack_types.size(); ++i) {
    if (attack_types[i] == AttackType::none)
      throw ConfigError("synth.attack_types: 'none' is not an attack type");
    for (size_t j = i + 1; j < attack_types.size(); ++j)
      if (attack_types[i] == attack_types[j])
        throw ConfigError("synth.attack_types: duplicate entry");
  }
  if (counts.train < 2 || counts.dev < 0 || counts.test < 2)
    throw ConfigError("synth.counts: train/test must hold both classes");
}

int SynthConfig::domain_index(const std::string& name) const {
  for (size_t i = 0; i < domains.size(); ++i)
    if (domains[i].name == name) return static_cast<int>(i);
  return -1;
}

bool SynthConfig::type_enabled(AttackType t) const {
  return std::find(attack_types.begin(), attack_types.end(), t) != attack_types.end();
}

std::string SampleRef::id(const SynthConfig& cfg) const {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05u", index);
  const std::string tname = type == AttackType::none ? "live" : attack_type_name(type);
  return cfg.domains[static_cast<size_t>(domain)].name + "_" + tname + "_" + buf;
}

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;

struct Wave {
  double amp, fx, fy, phase;
};

// Per-sample face geometry and albedo, drawn before any pixel is rendered.
struct FacePaint {
  double cx, cy, r2_inv;
  std::array<double, 3> base;
  std::array<Wave, 3> waves;
};

FacePaint draw_face(Prng& rng, int side) {
  FacePaint f;
  f.cx = 0.5 * side + (rng.next_double() - 0.5) * side / 4.0;
  f.cy = 0.5 * side + (rng.next_double() - 0.5) * side / 4.0;
  const double radius = side * (0.40 + 0.10 * rng.next_double());
  f.r2_inv = 1.0 / (radius * radius);
  f.base = {0.70, 0.55, 0.44};
  for (auto& b : f.base) b += (rng.next_double() - 0.5) * 0.06;
  for (auto& w : f.waves) {
    w.amp = 0.02 + 0.02 * rng.next_double();
    w.fx = rng.uniform(0.5, 3.0);
    w.fy = rng.uniform(0.5, 3.0);
    w.phase = rng.uniform(0.0, kTau);
  }
  return f;
}

double bump_at(const FacePaint& f, double x, double y) {
  const double dx = x - f.cx, dy = y - f.cy;
  return std::max(0.0, 1.0 - (dx * dx + dy * dy) * f.r2_inv);
}

double tex_at(const FacePaint& f, int side, double x, double y) {
  double v = 0.0;
  for (const auto& w : f.waves) v += w.amp * std::sin(kTau * (w.fx * x + w.fy * y) / side + w.phase);
  return v;
}

struct PrintStyle {
  double period, phx, phy;
};

PrintStyle draw_print(Prng& rng) {
  return {3.0 + static_cast<double>(rng.next_below(3)), rng.uniform(0.0, kTau),
          rng.uniform(0.0, kTau)};
}

struct ReplayStyle {
  double f1, c1, s1, ph1;
  double f2, c2, s2, ph2;
};

ReplayStyle draw_replay(Prng& rng) {
  ReplayStyle r;
  const double a1 = rng.uniform(0.0, std::numbers::pi);
  const double a2 = a1 + rng.uniform(0.3, 0.8);
  r.f1 = rng.uniform(9.0, 16.0);
  r.c1 = std::cos(a1);
  r.s1 = std::sin(a1);
  r.ph1 = rng.uniform(0.0, kTau);
  r.f2 = rng.uniform(9.0, 16.0);
  r.c2 = std::cos(a2);
  r.s2 = std::sin(a2);
  r.ph2 = rng.uniform(0.0, kTau);
  return r;
}

double halftone_at(const PrintStyle& p, double x, double y) {
  const double dot = std::sin(kTau * x / p.period + p.phx) * std::sin(kTau * y / p.period + p.phy);
  return dot > 0.2 ? -0.16 : 0.04;
}

double moire_at(const ReplayStyle& r, int side, double x, double y) {
  return 0.11 * std::sin(kTau * r.f1 * (x * r.c1 + y * r.s1) / side + r.ph1) +
         0.11 * std::sin(kTau * r.f2 * (x * r.c2 + y * r.s2) / side + r.ph2);
}

constexpr std::array<double, 3> kScreenCast{0.90, 1.00, 1.14};

void paint_live(const FacePaint& f, int side, int x, int y, double* px) {
  const double b = bump_at(f, x, y);
  const double t = tex_at(f, side, x, y);
  for (int c = 0; c < 3; ++c) px[c] = f.base[static_cast<size_t>(c)] + 0.30 * b + t;
}

void paint_print(const FacePaint& f, const PrintStyle& style, int side, int x, int y, double* px) {
  // Flattened reproduction: no depth shading, desaturated, halftone grid.
  const double t = tex_at(f, side, x, y);
  const double lum = (f.base[0] + f.base[1] + f.base[2]) / 3.0;
  const double ht = halftone_at(style, x, y);
  for (int c = 0; c < 3; ++c)
    px[c] = 0.65 * f.base[static_cast<size_t>(c)] + 0.35 * lum + t + ht;
}

void paint_replay(const FacePaint& f, const ReplayStyle& style, int side, int x, int y, double* px) {
  // Replayed face keeps its shading but gains stripe interference and a
  // screen color cast.
  const double b = bump_at(f, x, y);
  const double t = tex_at(f, side, x, y);
  const double m = moire_at(style, side, x, y);
  for (int c = 0; c < 3; ++c)
    px[c] = (f.base[static_cast<size_t>(c)] + 0.24 * b + t + m) * kScreenCast[static_cast<size_t>(c)];
}

void paint_mask_patch(const FacePaint& f, double stripe_phase, int side, int x, int y, double* px) {
  // Glossy prosthetic: flat, strongly desaturated, narrow specular bands
  // plus a faint molded micro-grid.
  const double bands = 0.12 * std::sin(kTau * 3.0 * (x + y) / side + stripe_phase);
  const double grid = ((x % 4 == 0) || (y % 4 == 0)) ? -0.06 : 0.02;
  for (int c = 0; c < 3; ++c)
    px[c] = 0.30 * f.base[static_cast<size_t>(c)] + 0.70 * 0.62 + bands + grid;
}

Tensor live_depth_map(const FacePaint& f, int image_side) {
  Tensor d({32, 32});
  double maxv = 0.0;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const double sx = (x + 0.5) * image_side / 32.0;
      const double sy = (y + 0.5) * image_side / 32.0;
      const double v = bump_at(f, sx, sy);
      d.at({y, x}) = v;
      maxv = std::max(maxv, v);
    }
  // Normalize so the maximum is attained exactly at 1.
  PSLAB_CHECK(maxv > 0.0, "degenerate depth bump");
  for (std::int64_t i = 0; i < d.numel(); ++i) d[i] /= maxv;
  return d;
}

}  // namespace

LabeledSample generate_sample(const SynthConfig& cfg, const SampleRef& ref) {
  PSLAB_CHECK(ref.domain >= 0 && ref.domain < static_cast<int>(cfg.domains.size()),
              "sample domain index out of range");
  if (ref.type != AttackType::none && !cfg.type_enabled(ref.type))
    throw ConfigError(std::string("attack type '") + attack_type_name(ref.type) +
                      "' is not enabled in synth.attack_types");
  const int side = cfg.image_side;
  const DomainPreset& dom = cfg.domains[static_cast<size_t>(ref.domain)];

  Prng rng = Prng(cfg.seed)
                 .fork(key_of("sample"))
                 .fork(static_cast<std::uint64_t>(ref.domain))
                 .fork(static_cast<std::uint64_t>(ref.type))
                 .fork(ref.index);

  const FacePaint face = draw_face(rng, side);

  LabeledSample s;
  s.attack_type = ref.type;
  s.domain = dom.name;
  s.live = ref.type == AttackType::none;
  s.image = Tensor({3, side, side});
  // Full-frame attacks get an all-attack mask; partial attacks start live
  // and zero exactly the patch region below.
  const bool full_frame_attack = ref.type == AttackType::print || ref.type == AttackType::replay;
  s.mask = fill_binary_mask(full_frame_attack ? ScalarLabel::spoof : ScalarLabel::live, side, side);

  const std::int64_t plane = static_cast<std::int64_t>(side) * side;
  auto paint_full = [&](auto&& painter) {
    double px[3];
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        painter(x, y, px);
        for (int c = 0; c < 3; ++c)
          s.image[c * plane + static_cast<std::int64_t>(y) * side + x] = px[c];
      }
  };

  switch (ref.type) {
    case AttackType::none:
      paint_full([&](int x, int y, double* px) { paint_live(face, side, x, y, px); });
      break;
    case AttackType::print: {
      const PrintStyle style = draw_print(rng);
      paint_full([&](int x, int y, double* px) { paint_print(face, style, side, x, y, px); });
      break;
    }
    case AttackType::replay: {
      const ReplayStyle style = draw_replay(rng);
      paint_full([&](int x, int y, double* px) { paint_replay(face, style, side, x, y, px); });
      break;
    }
    case AttackType::partial_print:
    case AttackType::partial_mask: {
      paint_full([&](int x, int y, double* px) { paint_live(face, side, x, y, px); });
      const int min_side = side / 4, max_side = side / 2;
      s.patch_w = min_side + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_side - min_side + 1)));
      s.patch_h = min_side + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_side - min_side + 1)));
      s.patch_x = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(side - s.patch_w + 1)));
      s.patch_y = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(side - s.patch_h + 1)));
      const PrintStyle pstyle = draw_print(rng);
      const double stripe_phase = rng.uniform(0.0, kTau);
      double px[3];
      for (int y = s.patch_y; y < s.patch_y + s.patch_h; ++y)
        for (int x = s.patch_x; x < s.patch_x + s.patch_w; ++x) {
          if (ref.type == AttackType::partial_print)
            paint_print(face, pstyle, side, x, y, px);
          else
            paint_mask_patch(face, stripe_phase, side, x, y, px);
          const bool border = y == s.patch_y || y == s.patch_y + s.patch_h - 1 ||
                              x == s.patch_x || x == s.patch_x + s.patch_w - 1;
          for (int c = 0; c < 3; ++c)
            s.image[c * plane + static_cast<std::int64_t>(y) * side + x] =
                px[c] - (border ? 0.08 : 0.0);
          s.mask.at(y, x) = 0;
        }
      break;
    }
  }

  // Domain rendering: illumination gain, color cast, sensor noise; then
  // 8-bit quantization so PPM export round-trips exactly.
  for (int c = 0; c < 3; ++c) {
    const double cast = dom.gain * dom.cast[static_cast<size_t>(c)];
    double* chan = s.image.data() + c * plane;
    for (std::int64_t i = 0; i < plane; ++i) {
      double v = chan[i] * cast + (rng.next_double() * 2.0 - 1.0) * dom.noise;
      v = std::clamp(v, 0.0, 1.0);
      chan[i] = std::floor(255.0 * v + 0.5) / 255.0;
    }
  }

  s.depth = s.live ? live_depth_map(face, side) : Tensor({32, 32});
  return s;
}

namespace {

struct RosterCounters {
  std::map<std::pair<int, int>, std::uint32_t> next;

  SampleRef take(int domain, AttackType type) {
    auto& c = next[{domain, static_cast<int>(type)}];
    return SampleRef{domain, type, c++};
  }
};

void fill_split(RosterCounters& counters, int count, const std::vector<int>& domains,
                const std::vector<AttackType>& spoof_types, std::vector<SampleRef>& out) {
  const int n_live = count / 2;
  const int n_spoof = count - n_live;
  const int nd = static_cast<int>(domains.size());
  const int nt = static_cast<int>(spoof_types.size());
  for (int i = 0; i < n_live; ++i)
    out.push_back(counters.take(domains[static_cast<size_t>(i % nd)], AttackType::none));
  for (int i = 0; i < n_spoof; ++i) {
    const AttackType t = spoof_types[static_cast<size_t>(i % nt)];
    const int d = domains[static_cast<size_t>((i / nt) % nd)];
    out.push_back(counters.take(d, t));
  }
}

}  // namespace

ProtocolSplit build_protocol(const SynthConfig& cfg, ProtocolKind kind,
                             const std::string& held_out) {
  cfg.validate();
  ProtocolSplit split;
  split.kind = kind;
  split.held_out = held_out;

  std::vector<int> all_domains(cfg.domains.size());
  for (size_t i = 0; i < all_domains.size(); ++i) all_domains[i] = static_cast<int>(i);

  std::vector<int> fit_domains = all_domains, test_domains = all_domains;
  std::vector<AttackType> fit_types = cfg.attack_types, test_types = cfg.attack_types;

  switch (kind) {
    case ProtocolKind::intra:
      break;
    case ProtocolKind::cross_type_loo: {
      const auto held = attack_type_from_name(held_out);
      if (!held || *held == AttackType::none || !cfg.type_enabled(*held))
        throw ConfigError("protocol.held_out must name an enabled attack type, got '" + held_out + "'");
      fit_types.clear();
      for (AttackType t : cfg.attack_types)
        if (t != *held) fit_types.push_back(t);
      if (fit_types.empty())
        throw ConfigError("cross_type_loo needs at least two enabled attack types");
      test_types = {*held};
      break;
    }
    case ProtocolKind::cross_domain: {
      const int held = cfg.domain_index(held_out);
      if (held < 0)
        throw ConfigError("protocol.held_out must name a domain, got '" + held_out + "'");
      fit_domains.clear();
      for (int d : all_domains)
        if (d != held) fit_domains.push_back(d);
      if (fit_domains.empty()) throw ConfigError("cross_domain needs at least two domains");
      test_domains = {held};
      break;
    }
  }

  RosterCounters counters;
  fill_split(counters, cfg.counts.train, fit_domains, fit_types, split.train);
  fill_split(counters, cfg.counts.dev, fit_domains, fit_types, split.dev);
  fill_split(counters, cfg.counts.test, test_domains, test_types, split.test);
  return split;
}

void export_split(const SynthConfig& cfg, const ProtocolSplit& split, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::array<std::pair<const char*, const std::vector<SampleRef>*>, 3> folds{
      {{"train", &split.train}, {"dev", &split.dev}, {"test", &split.test}}};
  for (const auto& [fold, refs] : folds) {
    const fs::path dir = fs::path(out_dir) / fold;
    fs::create_directories(dir);
    std::ofstream index(dir / "index.csv", std::ios::binary);
    if (!index) throw IoError("cannot write index.csv under " + dir.string());
    index << "id,label,attack_type,domain,fold\n";
    for (const SampleRef& ref : *refs) {
      const LabeledSample s = generate_sample(cfg, ref);
      const std::string id = ref.id(cfg);
      write_ppm((dir / (id + ".ppm")).string(), s.image);
      write_mask_pgm((dir / (id + "_mask.pgm")).string(), s.mask);
      save_tensor((dir / (id + "_depth.pslt")).string(), s.depth);
      index << id << ',' << (s.live ? "live" : "spoof") << ',' << attack_type_name(s.attack_type)
            << ',' << s.domain << ',' << fold << '\n';
    }
  }
}

}  // namespace pslab
