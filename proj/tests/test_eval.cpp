// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "doctest.h"
#include "ssdkan/eval.hpp"
#include "ssdkan/rng.hpp"

using namespace ssdkan;

namespace {

TrialScores make_scores(const std::vector<double>& bonafide,
                        const std::vector<double>& spoof) {
  TrialScores s;
  int id = 0;
  for (double v : bonafide) {
    s.entries.push_back({"B" + std::to_string(id++), v, TrialLabel::Bonafide});
  }
  for (double v : spoof) {
    s.entries.push_back({"S" + std::to_string(id++), v, TrialLabel::Spoof});
  }
  return s;
}

// Brute-force operating points: every midpoint threshold plus the accept-all
// and reject-all sentinels, each counted directly over the trial list.
std::vector<DetPoint> det_oracle(const TrialScores& s) {
  std::set<double> distinct;
  int64_t n_bona = 0;
  int64_t n_spoof = 0;
  for (const auto& e : s.entries) {
    distinct.insert(e.score);
    (e.label == TrialLabel::Bonafide ? n_bona : n_spoof) += 1;
  }
  std::vector<double> vals(distinct.begin(), distinct.end());
  std::vector<double> thresholds;
  thresholds.push_back(-std::numeric_limits<double>::infinity());
  for (size_t i = 1; i < vals.size(); ++i) {
    thresholds.push_back(0.5 * (vals[i - 1] + vals[i]));
  }
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::vector<DetPoint> out;
  for (double t : thresholds) {
    int64_t fa = 0;
    int64_t miss = 0;
    for (const auto& e : s.entries) {
      const bool accept = e.score >= t;
      if (e.label == TrialLabel::Spoof && accept) ++fa;
      if (e.label == TrialLabel::Bonafide && !accept) ++miss;
    }
    out.push_back({t, static_cast<double>(fa) / static_cast<double>(n_spoof),
                   static_cast<double>(miss) / static_cast<double>(n_bona)});
  }
  return out;
}

double eer_oracle(const TrialScores& s) {
  auto curve = det_oracle(s);
  size_t i = 0;
  while (i < curve.size() && curve[i].miss < curve[i].false_alarm) ++i;
  if (curve[i].miss == curve[i].false_alarm) return curve[i].miss;
  const auto& lo = curve[i - 1];
  const auto& hi = curve[i];
  const double denom =
      (hi.miss - lo.miss) - (hi.false_alarm - lo.false_alarm);
  const double t = (lo.false_alarm - lo.miss) / denom;
  return lo.false_alarm + t * (hi.false_alarm - lo.false_alarm);
}

TrialScores random_scores(Rng& rng, int max_size) {
  const int n_bona = 1 + static_cast<int>(rng.uniform_int(max_size / 2));
  const int n_spoof = 1 + static_cast<int>(rng.uniform_int(max_size / 2));
  std::vector<double> bona(n_bona);
  std::vector<double> spoof(n_spoof);
  // overlapping distributions with occasional exact ties
  for (auto& v : bona) v = std::round(rng.normal() * 4.0 + 1.0) / 2.0;
  for (auto& v : spoof) v = std::round(rng.normal() * 4.0 - 1.0) / 2.0;
  return make_scores(bona, spoof);
}

TdcfParams ideal_asv_params() { return TdcfParams{}; }

}  // namespace

TEST_CASE("EER is zero for perfectly separated scores") {
  auto s = make_scores({2.0, 3.0}, {0.0, 1.0});
  auto r = compute_eer(s);
  CHECK(r.eer == 0.0);
  CHECK(r.threshold > 1.0);
  CHECK(r.threshold <= 2.0);
}

TEST_CASE("EER is one half when every score is identical") {
  auto s = make_scores({1.5, 1.5, 1.5}, {1.5, 1.5});
  auto r = compute_eer(s);
  CHECK(r.eer == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("six-trial case lands at exactly one third") {
  auto s = make_scores({0.9, 0.8, 0.4}, {0.7, 0.3, 0.2});
  auto r = compute_eer(s);
  CHECK(r.eer == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("metrics reject single-class inputs") {
  TrialScores s = make_scores({1.0, 2.0}, {});
  CHECK_THROWS_AS(compute_eer(s), MetricError);
  CHECK_THROWS_AS(det_curve(s), MetricError);
  TrialScores empty;
  CHECK_THROWS_AS(compute_eer(empty), MetricError);
}

TEST_CASE("det curve on a minimal separated pair has three points with both "
          "extremes") {
  auto s = make_scores({1.0}, {0.0});
  auto curve = det_curve(s);
  REQUIRE(curve.size() == 3);
  CHECK(curve.front().false_alarm == 1.0);
  CHECK(curve.front().miss == 0.0);
  CHECK(curve[1].false_alarm == 0.0);
  CHECK(curve[1].miss == 0.0);
  CHECK(curve.back().false_alarm == 0.0);
  CHECK(curve.back().miss == 1.0);
}

TEST_CASE("det curve equals the brute-force counting oracle exactly") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    TrialScores s = random_scores(rng, 200);
    auto got = det_curve(s);
    auto expect = det_oracle(s);
    REQUIRE(got.size() == expect.size());
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].threshold == expect[i].threshold);
      CHECK(got[i].false_alarm == expect[i].false_alarm);
      CHECK(got[i].miss == expect[i].miss);
    }
    // monotonicity and bounds
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].false_alarm >= 0.0);
      CHECK(got[i].false_alarm <= 1.0);
      CHECK(got[i].miss >= 0.0);
      CHECK(got[i].miss <= 1.0);
      if (i > 0) {
        CHECK(got[i].false_alarm <= got[i - 1].false_alarm);
        CHECK(got[i].miss >= got[i - 1].miss);
      }
    }
  }
}

TEST_CASE("compute_eer equals the exhaustive sweep oracle on random sets") {
  Rng rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    TrialScores s = random_scores(rng, 200);
    CHECK(compute_eer(s).eer == eer_oracle(s));
  }
}

TEST_CASE("EER is invariant under strictly increasing transforms") {
  Rng rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    TrialScores s = random_scores(rng, 120);
    const double base = compute_eer(s).eer;
    TrialScores affine = s;
    for (auto& e : affine.entries) e.score = 2.5 * e.score + 7.0;
    CHECK(compute_eer(affine).eer == base);
    TrialScores expd = s;
    for (auto& e : expd.entries) e.score = std::exp(e.score * 0.4);
    CHECK(compute_eer(expd).eer == base);
  }
}

TEST_CASE("EER is symmetric under score negation with label swap") {
  Rng rng(45);
  for (int trial = 0; trial < 20; ++trial) {
    TrialScores s = random_scores(rng, 120);
    TrialScores flipped = s;
    for (auto& e : flipped.entries) {
      e.score = -e.score;
      e.label = e.label == TrialLabel::Bonafide ? TrialLabel::Spoof
                                                : TrialLabel::Bonafide;
    }
    CHECK(compute_eer(flipped).eer ==
          doctest::Approx(compute_eer(s).eer).epsilon(1e-12));
  }
}

TEST_CASE("duplicating a trial re-weights rates exactly as the oracle says") {
  Rng rng(46);
  TrialScores s = random_scores(rng, 60);
  s.entries.push_back({"DUP", s.entries[0].score, s.entries[0].label});
  CHECK(compute_eer(s).eer == eer_oracle(s));
  auto got = det_curve(s);
  auto expect = det_oracle(s);
  REQUIRE(got.size() == expect.size());
  for (size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].false_alarm == expect[i].false_alarm);
    CHECK(got[i].miss == expect[i].miss);
  }
}

TEST_CASE("min t-DCF is zero for a perfect countermeasure under the ideal-ASV "
          "default") {
  auto s = make_scores({2.0, 3.0, 4.0}, {-1.0, 0.0, 1.0});
  CHECK(compute_min_tdcf(s, ideal_asv_params()) == 0.0);
}

TEST_CASE("min t-DCF is exactly one for a constant countermeasure") {
  auto s = make_scores({1.0, 1.0}, {1.0, 1.0, 1.0});
  CHECK(compute_min_tdcf(s, ideal_asv_params()) == 1.0);
}

TEST_CASE("min t-DCF lies in [0, 1] and is monotone-transform invariant") {
  Rng rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    TrialScores s = random_scores(rng, 150);
    const double v = compute_min_tdcf(s, ideal_asv_params());
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    TrialScores warped = s;
    for (auto& e : warped.entries) e.score = std::atan(e.score) * 3.0 + 11.0;
    CHECK(compute_min_tdcf(warped, ideal_asv_params()) == v);
  }
}

TEST_CASE("min t-DCF with a non-ideal ASV operating point stays normalized") {
  TdcfParams p;
  p.asv_miss = 0.02;
  p.asv_fa = 0.03;
  p.asv_spoof_fa = 0.9;
  Rng rng(48);
  for (int trial = 0; trial < 10; ++trial) {
    TrialScores s = random_scores(rng, 100);
    const double v = compute_min_tdcf(s, p);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  // perfect CM no longer reaches zero once the ASV itself errs
  auto s = make_scores({5.0, 6.0}, {-5.0, -6.0});
  CHECK(compute_min_tdcf(s, p) > 0.0);
}

TEST_CASE("t-DCF parameter validation") {
  TdcfParams p;
  p.p_target = -0.1;
  CHECK_THROWS_AS(p.validate(), MetricError);
  p = TdcfParams{};
  p.p_spoof = 0.5;  // priors no longer sum to one
  CHECK_THROWS_AS(p.validate(), MetricError);
  p = TdcfParams{};
  p.cost_miss = 0.0;
  CHECK_THROWS_AS(p.validate(), MetricError);
  p = TdcfParams{};
  p.asv_fa = 1.5;
  CHECK_THROWS_AS(p.validate(), MetricError);
  p = TdcfParams{};
  p.asv_spoof_fa = 0.0;  // C2 = 0, countermeasure cannot matter
  CHECK_THROWS_AS(p.validate(), MetricError);
  p = TdcfParams{};
  p.asv_miss = 1.0;  // C1 <= 0
  CHECK_THROWS_AS(p.validate(), MetricError);
}

TEST_CASE("score and label files round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ssdkan_eval_test";
  fs::create_directories(dir);
  Rng rng(49);
  TrialScores s = random_scores(rng, 50);
  // make scores awkward to serialize
  s.entries[0].score = 0.1 + 0.2;
  s.entries[1].score = -1.2345678901234567e-13;
  write_scores(dir / "scores.txt", s);
  write_labels(dir / "labels.txt", s);
  TrialScores back = join_scores_labels(read_score_file(dir / "scores.txt"),
                                        read_label_file(dir / "labels.txt"));
  REQUIRE(back.entries.size() == s.entries.size());
  for (size_t i = 0; i < s.entries.size(); ++i) {
    CHECK(back.entries[i].id == s.entries[i].id);
    CHECK(back.entries[i].score == s.entries[i].score);  // 17 digits round trip
    CHECK(back.entries[i].label == s.entries[i].label);
  }
  fs::remove_all(dir);
}

TEST_CASE("empty score file reads as empty and metrics then reject it") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ssdkan_eval_empty";
  fs::create_directories(dir);
  { std::ofstream out(dir / "scores.txt"); }
  auto scores = read_score_file(dir / "scores.txt");
  CHECK(scores.empty());
  TrialScores empty;
  CHECK_THROWS_AS(compute_eer(empty), MetricError);
  fs::remove_all(dir);
}

TEST_CASE("unknown label token raises a parse error naming the line") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ssdkan_eval_badlabel";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "labels.txt");
    out << "T1 bonafide\nT2 genuine\n";
  }
  try {
    read_label_file(dir / "labels.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":2") != std::string::npos);
    CHECK(msg.find("genuine") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("malformed score line raises a parse error naming the line") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "ssdkan_eval_badscore";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "scores.txt");
    out << "T1 0.25\nT2 not_a_number\n";
  }
  try {
    read_score_file(dir / "scores.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("joining rejects duplicates and missing labels") {
  std::vector<std::pair<std::string, double>> scores = {{"A", 1.0},
                                                        {"B", 2.0}};
  std::vector<std::pair<std::string, TrialLabel>> labels = {
      {"A", TrialLabel::Bonafide}};
  CHECK_THROWS_AS(join_scores_labels(scores, labels), ParseError);
  labels.push_back({"B", TrialLabel::Spoof});
  CHECK_NOTHROW(join_scores_labels(scores, labels));
  scores.push_back({"A", 3.0});
  CHECK_THROWS_AS(join_scores_labels(scores, labels), ParseError);
}
