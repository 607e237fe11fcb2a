#include "pslab/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace pslab {

void ScoreSet::add(double score, BinaryClass label, std::string attack_type, std::string fold) {
  PSLAB_CHECK(std::isfinite(score), "score must be finite");
  entries.push_back({score, label, std::move(attack_type), std::move(fold)});
}

int ScoreSet::count(BinaryClass c) const {
  int n = 0;
  for (const auto& e : entries)
    if (e.label == c) ++n;
  return n;
}

ApcerResult apcer(const ScoreSet& scores, double threshold) {
  std::map<std::string, std::pair<int, int>> per_type;  // accepted, total
  for (const auto& e : scores.entries) {
    if (e.label != BinaryClass::attack) continue;
    auto& [accepted, total] = per_type[e.attack_type];
    ++total;
    if (e.score >= threshold) ++accepted;
  }
  if (per_type.empty()) throw Error("apcer: no attack entries");
  ApcerResult r;
  for (const auto& [type, counts] : per_type) {
    const double rate = static_cast<double>(counts.first) / counts.second;
    r.per_type[type] = rate;
    r.overall = std::max(r.overall, rate);
  }
  return r;
}

double bpcer(const ScoreSet& scores, double threshold) {
  int rejected = 0, total = 0;
  for (const auto& e : scores.entries) {
    if (e.label != BinaryClass::bonafide) continue;
    ++total;
    if (e.score < threshold) ++rejected;
  }
  if (total == 0) throw Error("bpcer: no bonafide entries");
  return static_cast<double>(rejected) / total;
}

double acer(double apcer_value, double bpcer_value) {
  PSLAB_CHECK(apcer_value >= 0.0 && apcer_value <= 1.0 && bpcer_value >= 0.0 && bpcer_value <= 1.0,
              "acer inputs must be fractions in [0,1]");
  return (apcer_value + bpcer_value) / 2.0;
}

double far_at(const ScoreSet& scores, double threshold) {
  int accepted = 0, total = 0;
  for (const auto& e : scores.entries) {
    if (e.label != BinaryClass::attack) continue;
    ++total;
    if (e.score >= threshold) ++accepted;
  }
  if (total == 0) throw Error("far: no attack entries");
  return static_cast<double>(accepted) / total;
}

double frr_at(const ScoreSet& scores, double threshold) { return bpcer(scores, threshold); }

namespace {

void require_two_classes(const ScoreSet& scores, const char* who) {
  if (scores.count(BinaryClass::bonafide) == 0 || scores.count(BinaryClass::attack) == 0)
    throw Error(std::string(who) + ": both classes must be present");
}

// Candidate thresholds: one below every score, midpoints of adjacent
// distinct scores, one above every score.
std::vector<double> candidate_thresholds(const ScoreSet& scores) {
  std::set<double> uniq;
  for (const auto& e : scores.entries) uniq.insert(e.score);
  std::vector<double> sorted(uniq.begin(), uniq.end());
  std::vector<double> cands;
  cands.push_back(sorted.front() - 1.0);
  for (size_t i = 0; i + 1 < sorted.size(); ++i) cands.push_back((sorted[i] + sorted[i + 1]) / 2.0);
  cands.push_back(sorted.back() + 1.0);
  return cands;
}

}  // namespace

double roc_auc(const ScoreSet& scores) {
  require_two_classes(scores, "roc_auc");
  // Sweep the threshold downward through the unique scores; each step adds
  // a trapezoid under the (FPR, TPR) curve. Ties move both coordinates at
  // once and thus earn half credit.
  std::vector<std::pair<double, int>> pts;  // score, is_bonafide
  pts.reserve(scores.size());
  int n_pos = 0, n_neg = 0;
  for (const auto& e : scores.entries) {
    const bool pos = e.label == BinaryClass::bonafide;
    pts.emplace_back(e.score, pos ? 1 : 0);
    (pos ? n_pos : n_neg)++;
  }
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  double auc = 0.0;
  double tp = 0.0, fp = 0.0;
  size_t i = 0;
  while (i < pts.size()) {
    size_t j = i;
    double d_tp = 0.0, d_fp = 0.0;
    while (j < pts.size() && pts[j].first == pts[i].first) {
      (pts[j].second ? d_tp : d_fp) += 1.0;
      ++j;
    }
    const double fpr0 = fp / n_neg, tpr0 = tp / n_pos;
    tp += d_tp;
    fp += d_fp;
    const double fpr1 = fp / n_neg, tpr1 = tp / n_pos;
    auc += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0;
    i = j;
  }
  return auc;
}

EerResult eer(const ScoreSet& scores) {
  require_two_classes(scores, "eer");
  EerResult best;
  double best_gap = -1.0;
  for (double t : candidate_thresholds(scores)) {
    const double far = far_at(scores, t);
    const double frr = frr_at(scores, t);
    const double gap = std::abs(far - frr);
    if (best_gap < 0.0 || gap < best_gap) {
      best_gap = gap;
      best.threshold = t;
      best.eer = (far + frr) / 2.0;
    }
  }
  return best;
}

double hter(const ScoreSet& dev, const ScoreSet& test) {
  require_two_classes(dev, "hter(dev)");
  require_two_classes(test, "hter(test)");
  const double t = eer(dev).threshold;
  return (far_at(test, t) + frr_at(test, t)) / 2.0;
}

std::string format_percent(double fraction, int decimals) {
  double v = fraction * 100.0;
  double scale = std::pow(10.0, decimals);
  // Round half away from zero. The 1e-9 guard keeps decimal-intent ties
  // (e.g. (2.9 + 5.8)/2 = 4.35) on the documented side regardless of which
  // neighbour the binary representation landed on.
  v = (v >= 0.0 ? std::floor(v * scale + 0.5 + 1e-9) : std::ceil(v * scale - 0.5 - 1e-9)) / scale;
  std::ostringstream oss;
  oss.setf(std::ios::fixed);
  oss.precision(decimals);
  oss << v;
  return oss.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["threshold"] = threshold;
  j["apcer_percent"] = apcer * 100.0;
  j["bpcer_percent"] = bpcer * 100.0;
  j["acer_percent"] = acer * 100.0;
  j["eer_percent"] = eer * 100.0;
  j["hter_percent"] = hter * 100.0;
  j["auc_percent"] = auc * 100.0;
  j["per_attack_apcer_percent"] = nlohmann::json::object();
  for (const auto& [type, v] : per_attack_apcer) j["per_attack_apcer_percent"][type] = v * 100.0;
  return j.dump(2);
}

namespace {

std::string double_to_string(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const char* class_name(BinaryClass c) { return c == BinaryClass::bonafide ? "bonafide" : "attack"; }

}  // namespace

void write_scores_csv(std::ostream& out, const ScoreSet& scores) {
  out << "score,label,attack_type,fold\n";
  for (const auto& e : scores.entries)
    out << double_to_string(e.score) << ',' << class_name(e.label) << ',' << e.attack_type << ','
        << e.fold << '\n';
}

void save_scores_csv(const std::string& path, const ScoreSet& scores) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for write: " + path);
  write_scores_csv(f, scores);
}

ScoreSet read_scores_csv(std::istream& in) {
  ScoreSet s;
  std::string line;
  if (!std::getline(in, line) || line != "score,label,attack_type,fold")
    throw IoError("bad score CSV header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::array<std::string, 4> fields;
    size_t start = 0;
    for (int f = 0; f < 4; ++f) {
      const size_t comma = f < 3 ? line.find(',', start) : line.size();
      if (comma == std::string::npos) throw IoError("bad score CSV row: " + line);
      fields[static_cast<size_t>(f)] = line.substr(start, comma - start);
      start = comma + 1;
    }
    double score = 0.0;
    const auto res =
        std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), score);
    if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size())
      throw IoError("bad score value: " + fields[0]);
    BinaryClass label;
    if (fields[1] == "bonafide")
      label = BinaryClass::bonafide;
    else if (fields[1] == "attack")
      label = BinaryClass::attack;
    else
      throw IoError("bad label value: " + fields[1]);
    s.add(score, label, fields[2], fields[3]);
  }
  return s;
}

ScoreSet load_scores_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for read: " + path);
  return read_scores_csv(f);
}

}  // namespace pslab
