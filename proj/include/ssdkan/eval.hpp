// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Countermeasure metrics: equal error rate and minimum normalized tandem
// detection cost, computed by sweeping every distinct-score operating point.
// Higher scores mean "more bonafide"; a trial is accepted when score >= t.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssdkan/errors.hpp"

namespace ssdkan {

enum class TrialLabel { Bonafide, Spoof };

std::string label_name(TrialLabel label);

struct ScoredTrial {
  std::string id;
  double score = 0.0;
  TrialLabel label = TrialLabel::Bonafide;
};

struct TrialScores {
  std::vector<ScoredTrial> entries;

  int64_t count(TrialLabel label) const;
  // Both classes present, all scores finite, ids unique.
  void validate_for_metrics() const;
};

struct DetPoint {
  double threshold;    // accept bonafide iff score >= threshold
  double false_alarm;  // spoof accepted / spoof count
  double miss;         // bonafide rejected / bonafide count
};

// Operating points at midpoints of adjacent distinct scores plus all-accept
// and all-reject sentinels. False alarm is non-increasing and miss
// non-decreasing in threshold; both extremes are included.
std::vector<DetPoint> det_curve(const TrialScores& scores);

struct EerResult {
  double eer;
  double threshold;
};

// Crossing of the false-alarm and miss curves, linearly interpolated between
// adjacent operating points when no exact crossing exists.
EerResult compute_eer(const TrialScores& scores);

struct TdcfParams {
  // Priors must be positive and sum to 1.
  double p_target = 0.9405;
  double p_nontarget = 0.0095;
  double p_spoof = 0.05;
  double cost_miss = 1.0;
  double cost_fa = 10.0;
  // Fixed operating point of the downstream speaker-verification system.
  double asv_miss = 0.0;
  double asv_fa = 0.0;
  double asv_spoof_fa = 1.0;

  void validate() const;
  static TdcfParams from_file(const std::filesystem::path& path);
};

// Minimum over CM thresholds of the normalized tandem cost. The normalizer
// is the cost of the better of the two trivial countermeasures (accept-all /
// reject-all), so the result is in [0, 1].
double compute_min_tdcf(const TrialScores& scores, const TdcfParams& params);

// Score file: one `trial_id score` per line, 17 significant digits, LF.
// Label file: one `trial_id bonafide|spoof` per line.
void write_scores(const std::filesystem::path& path, const TrialScores& scores);
void write_labels(const std::filesystem::path& path, const TrialScores& scores);
std::vector<std::pair<std::string, double>> read_score_file(
    const std::filesystem::path& path);
std::vector<std::pair<std::string, TrialLabel>> read_label_file(
    const std::filesystem::path& path);
TrialScores join_scores_labels(
    const std::vector<std::pair<std::string, double>>& scores,
    const std::vector<std::pair<std::string, TrialLabel>>& labels);

}  // namespace ssdkan
