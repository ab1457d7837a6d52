#include "svkit/metrics.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "svkit/binary_io.h"
#include "svkit/common.h"

namespace svkit {

void DCFParams::validate() const {
  check(c_miss > 0.0 && c_fa > 0.0, "dcf: costs must be positive");
  check(p_target > 0.0 && p_target < 1.0, "dcf: p_target must be in (0, 1)");
}

double DCFParams::default_cost() const {
  return std::min(c_miss * p_target, c_fa * (1.0 - p_target));
}

namespace {

void check_scores(const DetectionScores& s) {
  check(!s.target.empty(), "metrics: no target trials");
  check(!s.nontarget.empty(), "metrics: no nontarget trials");
  for (double v : s.target) check(std::isfinite(v), "metrics: non-finite score");
  for (double v : s.nontarget) check(std::isfinite(v), "metrics: non-finite score");
}

// Staircase with both endpoints: threshold -inf accepts everything, +inf
// rejects everything.
std::vector<RocPoint> full_curve(const DetectionScores& s) {
  std::vector<RocPoint> pts;
  const double inf = std::numeric_limits<double>::infinity();
  pts.push_back({-inf, 0.0, 1.0});
  const auto roc = roc_points(s);
  pts.insert(pts.end(), roc.begin(), roc.end());
  pts.push_back({inf, 1.0, 0.0});
  return pts;
}

}  // namespace

std::vector<RocPoint> roc_points(const DetectionScores& s) {
  check_scores(s);
  std::vector<double> tgt = s.target, non = s.nontarget;
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());
  std::vector<double> all;
  all.reserve(tgt.size() + non.size());
  std::merge(tgt.begin(), tgt.end(), non.begin(), non.end(), std::back_inserter(all));
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const double nt = static_cast<double>(tgt.size());
  const double nn = static_cast<double>(non.size());
  std::vector<RocPoint> pts;
  pts.reserve(all.size());
  std::size_t below_t = 0, below_n = 0;
  for (double tau : all) {
    while (below_t < tgt.size() && tgt[below_t] < tau) ++below_t;
    while (below_n < non.size() && non[below_n] < tau) ++below_n;
    pts.push_back({tau, static_cast<double>(below_t) / nt,
                   static_cast<double>(non.size() - below_n) / nn});
  }
  return pts;
}

EerResult compute_eer(const DetectionScores& s) {
  const auto pts = full_curve(s);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d = pts[i].p_miss - pts[i].p_fa;
    if (d < 0.0) continue;
    if (d == 0.0) return {pts[i].p_miss, pts[i].threshold};
    const auto& a = pts[i - 1];
    const auto& b = pts[i];
    const double da = a.p_miss - a.p_fa;
    const double t = -da / (d - da);
    // The threshold reported is the first accepting point past the crossing.
    return {a.p_miss + t * (b.p_miss - a.p_miss), b.threshold};
  }
  return {1.0, pts.back().threshold};
}

DcfResult compute_min_dcf(const DetectionScores& s, const DCFParams& p) {
  p.validate();
  DcfResult best{0.0, std::numeric_limits<double>::infinity(), 0.0};
  for (const auto& pt : full_curve(s)) {
    const double cost = p.c_miss * p.p_target * pt.p_miss + p.c_fa * (1.0 - p.p_target) * pt.p_fa;
    if (cost < best.min_dcf_raw) {
      best.min_dcf_raw = cost;
      best.threshold = pt.threshold;
    }
  }
  best.min_dcf = p.normalize ? best.min_dcf_raw / p.default_cost() : best.min_dcf_raw;
  return best;
}

EvaluationReport evaluate(const DetectionScores& s, const DCFParams& p) {
  const auto e = compute_eer(s);
  const auto d = compute_min_dcf(s, p);
  EvaluationReport r;
  r.eer_pct = 100.0 * e.eer;
  r.eer_threshold = e.threshold;
  r.min_dcf = d.min_dcf;
  r.min_dcf_raw = d.min_dcf_raw;
  r.min_dcf_threshold = d.threshold;
  r.n_target = s.target.size();
  r.n_nontarget = s.nontarget.size();
  r.p_target = p.p_target;
  r.c_miss = p.c_miss;
  r.c_fa = p.c_fa;
  return r;
}

EvaluationReport evaluate(std::span<const Trial> trials, std::span<const ScoredPair> scores,
                          const DCFParams& p) {
  std::unordered_map<std::string, double> by_pair;
  for (const auto& s : scores) by_pair[s.enroll + '\n' + s.test] = s.score;
  DetectionScores split;
  std::string missing;
  std::size_t n_missing = 0;
  for (const auto& t : trials) {
    const auto it = by_pair.find(t.enroll + '\n' + t.test);
    if (it == by_pair.end()) {
      ++n_missing;
      missing += "\n  " + t.enroll + " " + t.test;
      continue;
    }
    (t.target ? split.target : split.nontarget).push_back(it->second);
  }
  check(n_missing == 0, "evaluate: " + std::to_string(n_missing) + " trial(s) have no score:" + missing);
  return evaluate(split, p);
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  check(res.ec == std::errc() && res.ptr == s.data() + s.size(),
        "cannot parse number: " + std::string(s));
  return v;
}

std::string slurp(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path.c_str());
  return {bytes.begin(), bytes.end()};
}

}  // namespace

std::string format_report(const EvaluationReport& r) {
  std::ostringstream out;
  out << "eer_pct=" << fmt_double(r.eer_pct) << '\n'
      << "eer_threshold=" << fmt_double(r.eer_threshold) << '\n'
      << "min_dcf=" << fmt_double(r.min_dcf) << '\n'
      << "min_dcf_raw=" << fmt_double(r.min_dcf_raw) << '\n'
      << "min_dcf_threshold=" << fmt_double(r.min_dcf_threshold) << '\n'
      << "n_target=" << r.n_target << '\n'
      << "n_nontarget=" << r.n_nontarget << '\n'
      << "p_target=" << fmt_double(r.p_target) << '\n'
      << "c_miss=" << fmt_double(r.c_miss) << '\n'
      << "c_fa=" << fmt_double(r.c_fa) << '\n';
  return out.str();
}

EvaluationReport parse_report(const std::string& text) {
  EvaluationReport r;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    check(eq != std::string::npos, "report: expected key=value, got: " + line);
    const std::string key = line.substr(0, eq);
    const std::string_view value(line.data() + eq + 1, line.size() - eq - 1);
    if (key == "eer_pct") r.eer_pct = parse_double(value);
    else if (key == "eer_threshold") r.eer_threshold = parse_double(value);
    else if (key == "min_dcf") r.min_dcf = parse_double(value);
    else if (key == "min_dcf_raw") r.min_dcf_raw = parse_double(value);
    else if (key == "min_dcf_threshold") r.min_dcf_threshold = parse_double(value);
    else if (key == "n_target") r.n_target = static_cast<std::size_t>(parse_double(value));
    else if (key == "n_nontarget") r.n_nontarget = static_cast<std::size_t>(parse_double(value));
    else if (key == "p_target") r.p_target = parse_double(value);
    else if (key == "c_miss") r.c_miss = parse_double(value);
    else if (key == "c_fa") r.c_fa = parse_double(value);
    else throw Error("report: unknown key " + key);
  }
  return r;
}

std::vector<Trial> parse_trials(const std::string& text) {
  std::vector<Trial> trials;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    std::string label, extra;
    Trial t;
    if (!(fields >> label)) continue;
    check(static_cast<bool>(fields >> t.enroll >> t.test) && !(fields >> extra) &&
              (label == "0" || label == "1"),
          "trial file line " + std::to_string(lineno) + ": expected '<1|0> <enroll> <test>'");
    t.target = label == "1";
    trials.push_back(std::move(t));
  }
  return trials;
}

std::vector<Trial> read_trials(const std::filesystem::path& path) {
  return parse_trials(slurp(path));
}

void write_trials(const std::filesystem::path& path, std::span<const Trial> trials) {
  std::string out;
  for (const auto& t : trials) out += (t.target ? "1 " : "0 ") + t.enroll + ' ' + t.test + '\n';
  binio::write_file(path.c_str(), {out.data(), out.size()});
}

std::vector<ScoredPair> parse_scores(const std::string& text) {
  std::vector<ScoredPair> scores;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream fields(line);
    ScoredPair s;
    std::string value, extra;
    if (!(fields >> s.enroll)) continue;
    check(static_cast<bool>(fields >> s.test >> value) && !(fields >> extra),
          "score file line " + std::to_string(lineno) + ": expected '<enroll> <test> <score>'");
    s.score = parse_double(value);
    check(std::isfinite(s.score), "score file line " + std::to_string(lineno) + ": non-finite score");
    scores.push_back(std::move(s));
  }
  return scores;
}

std::vector<ScoredPair> read_scores(const std::filesystem::path& path) {
  return parse_scores(slurp(path));
}

std::string format_scores(std::span<const ScoredPair> scores) {
  std::string out;
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%.6f", s.score);
    out += s.enroll + ' ' + s.test + ' ' + buf + '\n';
  }
  return out;
}

}  // namespace svkit
