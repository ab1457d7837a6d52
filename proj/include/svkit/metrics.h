#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace svkit {

struct Trial {
  bool target = false;
  std::string enroll;
  std::string test;
};

struct ScoredPair {
  std::string enroll;
  std::string test;
  double score = 0.0;
};

/// Scores split by trial label.
struct DetectionScores {
  std::vector<double> target;
  std::vector<double> nontarget;
};

struct DCFParams {
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.05;
  bool normalize = true;

  void validate() const;
  /// Cost of the best trivial system: min(c_miss p_target, c_fa (1 - p_target)).
  double default_cost() const;
};

/// Operating point when accepting every trial with score >= threshold.
struct RocPoint {
  double threshold = 0.0;
  double p_miss = 0.0;
  double p_fa = 0.0;
};

/// One point per distinct score, ascending threshold.
std::vector<RocPoint> roc_points(const DetectionScores& s);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

/// Equal error rate on the ROC staircase (with +-inf endpoints), linearly
/// interpolated between the two points where p_miss - p_fa changes sign.
EerResult compute_eer(const DetectionScores& s);

struct DcfResult {
  double min_dcf = 0.0;      // normalized when params.normalize
  double min_dcf_raw = 0.0;
  double threshold = 0.0;    // may be +-inf
};

DcfResult compute_min_dcf(const DetectionScores& s, const DCFParams& p = {});

struct EvaluationReport {
  double eer_pct = 0.0;
  double eer_threshold = 0.0;
  double min_dcf = 0.0;
  double min_dcf_raw = 0.0;
  double min_dcf_threshold = 0.0;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
  double p_target = 0.05;
  double c_miss = 1.0;
  double c_fa = 1.0;

  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Joins scores to trials by (enroll, test); throws listing every trial that
/// has no score.
EvaluationReport evaluate(std::span<const Trial> trials, std::span<const ScoredPair> scores,
                          const DCFParams& p = {});
EvaluationReport evaluate(const DetectionScores& s, const DCFParams& p = {});

/// key=value lines; numbers use the shortest round-trip representation.
std::string format_report(const EvaluationReport& r);
EvaluationReport parse_report(const std::string& text);

// Trial file: "<1|0> <enroll> <test>" per line.
std::vector<Trial> read_trials(const std::filesystem::path& path);
std::vector<Trial> parse_trials(const std::string& text);
void write_trials(const std::filesystem::path& path, std::span<const Trial> trials);

// Score file: "<enroll> <test> <score>" with six decimals.
std::vector<ScoredPair> read_scores(const std::filesystem::path& path);
std::vector<ScoredPair> parse_scores(const std::string& text);
std::string format_scores(std::span<const ScoredPair> scores);

}  // namespace svkit
