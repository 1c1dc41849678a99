// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "ssdkan/config.hpp"

namespace ssdkan {

std::string label_name(TrialLabel label) {
  return label == TrialLabel::Bonafide ? "bonafide" : "spoof";
}

int64_t TrialScores::count(TrialLabel label) const {
  int64_t n = 0;
  for (const auto& e : entries) {
    if (e.label == label) ++n;
  }
  return n;
}

void TrialScores::validate_for_metrics() const {
  int64_t bona = 0;
  int64_t spoof = 0;
  std::unordered_set<std::string> seen;
  for (const auto& e : entries) {
    if (!std::isfinite(e.score)) {
      throw MetricError("trial '" + e.id + "' has a non-finite score");
    }
    if (!seen.insert(e.id).second) {
      throw MetricError("duplicate trial id '" + e.id + "'");
    }
    (e.label == TrialLabel::Bonafide ? bona : spoof) += 1;
  }
  if (bona == 0 || spoof == 0) {
    throw MetricError(
        "metrics require at least one bonafide and one spoof trial (got " +
        std::to_string(bona) + " bonafide, " + std::to_string(spoof) +
        " spoof)");
  }
}

std::vector<DetPoint> det_curve(const TrialScores& scores) {
  scores.validate_for_metrics();
  struct Item {
    double score;
    bool bona;
  };
  std::vector<Item> items;
  items.reserve(scores.entries.size());
  int64_t n_bona = 0;
  int64_t n_spoof = 0;
  for (const auto& e : scores.entries) {
    const bool b = e.label == TrialLabel::Bonafide;
    items.push_back({e.score, b});
    (b ? n_bona : n_spoof) += 1;
  }
  std::sort(items.begin(), items.end(),
            [](const Item& a, const Item& b) { return a.score < b.score; });

  const int64_t n = static_cast<int64_t>(items.size());
  // bona_below[c] = bonafide trials among the first c sorted items
  std::vector<int64_t> bona_below(n + 1, 0);
  for (int64_t i = 0; i < n; ++i) {
    bona_below[i + 1] = bona_below[i] + (items[i].bona ? 1 : 0);
  }
  auto point_at = [&](double threshold, int64_t cut) {
    // cut = index of the first item with score >= threshold
    const int64_t missed = bona_below[cut];
    const int64_t spoof_below = cut - missed;
    const int64_t accepted_spoof = n_spoof - spoof_below;
    DetPoint p;
    p.threshold = threshold;
    p.false_alarm =
        static_cast<double>(accepted_spoof) / static_cast<double>(n_spoof);
    p.miss = static_cast<double>(missed) / static_cast<double>(n_bona);
    return p;
  };

  std::vector<DetPoint> curve;
  const double inf = std::numeric_limits<double>::infinity();
  curve.push_back(point_at(-inf, 0));  // accept everything
  for (int64_t i = 1; i < n; ++i) {
    if (items[i].score != items[i - 1].score) {
      curve.push_back(
          point_at(0.5 * (items[i - 1].score + items[i].score), i));
    }
  }
  curve.push_back(point_at(inf, n));  // reject everything
  return curve;
}

EerResult compute_eer(const TrialScores& scores) {
  const std::vector<DetPoint> curve = det_curve(scores);
  // miss - false_alarm is monotone non-decreasing along the curve; find the
  // first non-negative point.
  size_t i = 0;
  while (i < curve.size() && curve[i].miss < curve[i].false_alarm) ++i;
  // i >= 1 because the accept-all point has miss 0, false alarm 1.
  const DetPoint& hi = curve[i];
  if (hi.miss == hi.false_alarm) {
    double thr = hi.threshold;
    if (!std::isfinite(thr)) {
      thr = i > 0 && std::isfinite(curve[i - 1].threshold)
                ? curve[i - 1].threshold
                : scores.entries.front().score;
    }
    return {hi.miss, thr};
  }
  const DetPoint& lo = curve[i - 1];
  const double denom =
      (hi.miss - lo.miss) - (hi.false_alarm - lo.false_alarm);
  const double s = (lo.false_alarm - lo.miss) / denom;
  const double eer = lo.false_alarm + s * (hi.false_alarm - lo.false_alarm);
  double thr;
  if (std::isfinite(lo.threshold) && std::isfinite(hi.threshold)) {
    thr = lo.threshold + s * (hi.threshold - lo.threshold);
  } else if (std::isfinite(lo.threshold)) {
    thr = lo.threshold;
  } else if (std::isfinite(hi.threshold)) {
    thr = hi.threshold;
  } else {
    thr = scores.entries.front().score;
  }
  return {eer, thr};
}

void TdcfParams::validate() const {
  if (!(p_target > 0.0 && p_nontarget > 0.0 && p_spoof > 0.0)) {
    throw MetricError("t-DCF: priors must be positive");
  }
  if (std::fabs(p_target + p_nontarget + p_spoof - 1.0) > 1e-9) {
    throw MetricError("t-DCF: priors must sum to 1");
  }
  if (!(cost_miss > 0.0 && cost_fa > 0.0)) {
    throw MetricError("t-DCF: costs must be positive");
  }
  auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate_ok(asv_miss) || !rate_ok(asv_fa) || !rate_ok(asv_spoof_fa)) {
    throw MetricError("t-DCF: ASV error rates must lie in [0, 1]");
  }
  const double c0 = p_target * cost_miss * asv_miss +
                    p_nontarget * cost_fa * asv_fa;
  const double c1 = p_target * cost_miss - c0;
  const double c2 = p_spoof * cost_fa * asv_spoof_fa;
  if (!(c1 > 0.0)) {
    throw MetricError(
        "t-DCF: ASV operating point leaves no cost for CM misses (C1 <= 0)");
  }
  if (!(c2 > 0.0)) {
    throw MetricError(
        "t-DCF: spoof false-accept weight is zero (C2 <= 0), the CM cannot "
        "affect the cost");
  }
}

TdcfParams TdcfParams::from_file(const std::filesystem::path& path) {
  ConfigMap cfg = ConfigMap::from_file(path);
  TdcfParams p;
  p.p_target = cfg.get_double("p_target", p.p_target);
  p.p_nontarget = cfg.get_double("p_nontarget", p.p_nontarget);
  p.p_spoof = cfg.get_double("p_spoof", p.p_spoof);
  p.cost_miss = cfg.get_double("cost_miss", p.cost_miss);
  p.cost_fa = cfg.get_double("cost_fa", p.cost_fa);
  p.asv_miss = cfg.get_double("asv_miss", p.asv_miss);
  p.asv_fa = cfg.get_double("asv_fa", p.asv_fa);
  p.asv_spoof_fa = cfg.get_double("asv_spoof_fa", p.asv_spoof_fa);
  cfg.reject_unknown();
  p.validate();
  return p;
}

double compute_min_tdcf(const TrialScores& scores, const TdcfParams& params) {
  params.validate();
  const double c0 = params.p_target * params.cost_miss * params.asv_miss +
                    params.p_nontarget * params.cost_fa * params.asv_fa;
  const double c1 = params.p_target * params.cost_miss - c0;
  const double c2 = params.p_spoof * params.cost_fa * params.asv_spoof_fa;
  const double normalizer = c0 + std::min(c1, c2);
  double best = std::numeric_limits<double>::infinity();
  for (const DetPoint& p : det_curve(scores)) {
    best = std::min(best, c0 + c1 * p.miss + c2 * p.false_alarm);
  }
  return best / normalizer;
}

// ---- file I/O ----------------------------------------------------------

void write_scores(const std::filesystem::path& path,
                  const TrialScores& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  char buf[64];
  for (const auto& e : scores.entries) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.score);
    out << e.id << ' ' << buf << '\n';
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

void write_labels(const std::filesystem::path& path,
                  const TrialScores& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  for (const auto& e : scores.entries) {
    out << e.id << ' ' << label_name(e.label) << '\n';
  }
  if (!out) throw IoError("write failed on '" + path.string() + "'");
}

namespace {

// Splits "id<space>rest"; throws ParseError naming the 1-based line.
std::pair<std::string, std::string> split_line(const std::string& line,
                                               const std::filesystem::path& path,
                                               int64_t lineno) {
  const size_t sp = line.find(' ');
  if (sp == std::string::npos || sp == 0 || sp + 1 >= line.size()) {
    throw ParseError(path.string() + ":" + std::to_string(lineno) +
                     ": expected 'trial_id value'");
  }
  return {line.substr(0, sp), line.substr(sp + 1)};
}

}  // namespace

std::vector<std::pair<std::string, double>> read_score_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::pair<std::string, double>> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto [id, rest] = split_line(line, path, lineno);
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": invalid score '" + rest + "'");
    }
    if (used != rest.size() || !std::isfinite(v)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": invalid score '" + rest + "'");
    }
    out.emplace_back(std::move(id), v);
  }
  return out;
}

std::vector<std::pair<std::string, TrialLabel>> read_label_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::pair<std::string, TrialLabel>> out;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto [id, rest] = split_line(line, path, lineno);
    TrialLabel label;
    if (rest == "bonafide") {
      label = TrialLabel::Bonafide;
    } else if (rest == "spoof") {
      label = TrialLabel::Spoof;
    } else {
      throw ParseError(path.string() + ":" + std::to_string(lineno) +
                       ": unknown label '" + rest +
                       "' (expected bonafide or spoof)");
    }
    out.emplace_back(std::move(id), label);
  }
  return out;
}

TrialScores join_scores_labels(
    const std::vector<std::pair<std::string, double>>& scores,
    const std::vector<std::pair<std::string, TrialLabel>>& labels) {
  std::unordered_map<std::string, TrialLabel> by_id;
  for (const auto& [id, label] : labels) {
    if (!by_id.emplace(id, label).second) {
      throw ParseError("duplicate trial id '" + id + "' in label list");
    }
  }
  TrialScores out;
  out.entries.reserve(scores.size());
  std::unordered_set<std::string> seen;
  for (const auto& [id, score] : scores) {
    if (!seen.insert(id).second) {
      throw ParseError("duplicate trial id '" + id + "' in score list");
    }
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw ParseError("trial '" + id + "' has a score but no label");
    }
    out.entries.push_back({id, score, it->second});
  }
  return out;
}

}  // namespace ssdkan
