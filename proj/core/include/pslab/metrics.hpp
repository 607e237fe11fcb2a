#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "pslab/common.hpp"

namespace pslab {

// Score polarity across the whole module: higher score = more bonafide.
enum class BinaryClass { bonafide, attack };

struct ScoreEntry {
  double score = 0.0;
  BinaryClass label = BinaryClass::bonafide;
  std::string attack_type;  // empty for bonafide entries
  std::string fold;
};

struct ScoreSet {
  std::vector<ScoreEntry> entries;

  void add(double score, BinaryClass label, std::string attack_type = "", std::string fold = "");
  size_t size() const { return entries.size(); }
  int count(BinaryClass c) const;
};

struct ApcerResult {
  double overall = 0.0;  // max over attack types
  std::map<std::string, double> per_type;
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Fraction of attacks accepted as bonafide (score >= threshold), per attack
// type; overall value is the worst type. Throws on an attack-free set.
ApcerResult apcer(const ScoreSet& scores, double threshold);

// Fraction of bonafide rejected (score < threshold). Throws on a
// bonafide-free set.
double bpcer(const ScoreSet& scores, double threshold);

double acer(double apcer_value, double bpcer_value);

// Threshold sweep with trapezoidal integration; tied scores earn half
// credit (equivalent to the pair-counting rank statistic).
double roc_auc(const ScoreSet& scores);

// Sweeps midpoints of sorted unique scores plus both outer extremes,
// minimizing |FAR - FRR| (ties broken toward the lower threshold);
// EER = (FAR + FRR)/2 at the chosen threshold.
EerResult eer(const ScoreSet& scores);

// Threshold fixed at the dev-set EER threshold; HTER = (FAR + FRR)/2 on the
// test set at that threshold.
double hter(const ScoreSet& dev, const ScoreSet& test);

double far_at(const ScoreSet& scores, double threshold);  // attacks >= threshold
double frr_at(const ScoreSet& scores, double threshold);  // bonafide < threshold

// Metrics are stored as fractions and reported as percentages.
struct EvalReport {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;
  double eer = 0.0;
  double hter = 0.0;
  double auc = 0.0;
  std::map<std::string, double> per_attack_apcer;

  std::string to_json() const;
};

// Percent formatting used in reports: fraction -> percent rounded half-up
// (away from zero) to `decimals` places, e.g. 0.0435 -> "4.4".
std::string format_percent(double fraction, int decimals = 1);

// CSV with header `score,label,attack_type,fold`; '.' decimal point, scores
// printed with shortest round-trip precision so files are byte-stable.
void write_scores_csv(std::ostream& out, const ScoreSet& scores);
void save_scores_csv(const std::string& path, const ScoreSet& scores);
ScoreSet read_scores_csv(std::istream& in);
ScoreSet load_scores_csv(const std::string& path);

}  // namespace pslab
