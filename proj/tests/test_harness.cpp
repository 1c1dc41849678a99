// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ssdkan/harness.hpp"

using namespace ssdkan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

CorpusSpec tiny_spec() {
  CorpusSpec spec;
  spec.train_size = 24;
  spec.dev_size = 8;
  spec.eval_size = 8;
  spec.duration_min = 0.2;
  spec.duration_max = 0.4;
  spec.duration_step = 0.1;
  return spec;
}

TrainConfig tiny_train_config() {
  TrainConfig cfg;
  cfg.model.projector.feature_dim = 16;
  cfg.model.projector.model_dim = 8;
  cfg.model.projector.grkan_groups = 4;
  cfg.model.encoder.model_dim = 8;
  cfg.model.encoder.blocks = 1;
  cfg.model.encoder.heads = 2;
  cfg.model.encoder.conv_kernel = 3;
  cfg.model.encoder.ffn_expansion = 2;
  cfg.model.encoder.dropout = 0.1;
  cfg.batch_size = 8;
  cfg.max_epochs = 2;
  cfg.patience = 3;
  cfg.top_n = 2;
  cfg.target_samples = 4800;  // 0.3 s
  cfg.seed = 5;
  return cfg;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("corpus generation is deterministic and well-formed") {
  CorpusSpec spec = tiny_spec();
  Corpus a = generate_corpus(spec, 42);
  Corpus b = generate_corpus(spec, 42);
  REQUIRE(a.train.size() == 24);
  REQUIRE(a.dev.size() == 8);
  REQUIRE(a.eval.size() == 8);
  for (size_t i = 0; i < a.train.size(); ++i) {
    CHECK(a.train[i].id == b.train[i].id);
    CHECK(a.train[i].label == b.train[i].label);
    REQUIRE(a.train[i].samples.size() == b.train[i].samples.size());
    CHECK(std::memcmp(a.train[i].samples.data(), b.train[i].samples.data(),
                      a.train[i].samples.size() * sizeof(double)) == 0);
  }
  Corpus c = generate_corpus(spec, 43);
  CHECK(std::memcmp(a.train[0].samples.data(), c.train[0].samples.data(),
                    std::min(a.train[0].samples.size(),
                             c.train[0].samples.size()) *
                        sizeof(double)) != 0);
}

TEST_CASE("waveforms stay in [-1, 1] and labels are balanced with unique ids") {
  Corpus corpus = generate_corpus(tiny_spec(), 7);
  std::set<std::string> ids;
  for (Split s : {Split::Train, Split::Dev, Split::Eval}) {
    int64_t bona = 0;
    int64_t spoof = 0;
    for (const auto& t : corpus.split(s)) {
      CHECK(ids.insert(t.id).second);
      (t.label == TrialLabel::Bonafide ? bona : spoof) += 1;
      for (double v : t.samples) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
      if (t.label == TrialLabel::Spoof) {
        CHECK((t.artifact == "notch" || t.artifact == "quantize" ||
               t.artifact == "phase"));
      } else {
        CHECK(t.artifact == "none");
      }
    }
    const int64_t total = bona + spoof;
    CHECK(std::abs(bona - spoof) <=
          std::max<int64_t>(1, total / 10));  // within ten percent
  }
}

TEST_CASE("corpus round trips through disk at float32 precision") {
  TempDir dir("ssdkan_corpus_rt");
  Corpus corpus = generate_corpus(tiny_spec(), 9);
  write_corpus(corpus, dir.path);
  Corpus back = read_corpus(dir.path);
  REQUIRE(back.train.size() == corpus.train.size());
  REQUIRE(back.eval.size() == corpus.eval.size());
  CHECK(back.seed == corpus.seed);
  CHECK(back.spec.sample_rate == corpus.spec.sample_rate);
  for (size_t i = 0; i < corpus.train.size(); ++i) {
    CHECK(back.train[i].id == corpus.train[i].id);
    CHECK(back.train[i].label == corpus.train[i].label);
    CHECK(back.train[i].artifact == corpus.train[i].artifact);
    REQUIRE(back.train[i].samples.size() == corpus.train[i].samples.size());
    for (size_t j = 0; j < corpus.train[i].samples.size(); ++j) {
      CHECK(back.train[i].samples[j] ==
            static_cast<double>(static_cast<float>(corpus.train[i].samples[j])));
    }
  }
}

TEST_CASE("pad_or_trim contract") {
  std::vector<double> wave = {1, 2, 3, 4};
  CHECK(pad_or_trim(wave, 4) == wave);
  CHECK(pad_or_trim(wave, 8) ==
        std::vector<double>{1, 2, 3, 4, 1, 2, 3, 4});
  CHECK(pad_or_trim(wave, 6) == std::vector<double>{1, 2, 3, 4, 1, 2});
  CHECK(pad_or_trim(wave, 2) == std::vector<double>{1, 2});
  CHECK_THROWS_AS(pad_or_trim(std::span<const double>(), 4), ContractError);
}

TEST_CASE("feature extraction is deterministic with exact framing") {
  Corpus corpus = generate_corpus(tiny_spec(), 3);
  const auto& wave = corpus.train[0].samples;
  Tensor a = extract_features(wave, 32, 16000);
  Tensor b = extract_features(wave, 32, 16000);
  CHECK(std::memcmp(a.data().data(), b.data().data(),
                    sizeof(double) * a.numel()) == 0);

  // frame arithmetic: win 400, hop 160 at 16 kHz
  CHECK(feature_frame_count(400, 16000) == 1);
  CHECK(feature_frame_count(399, 16000) == 0);
  CHECK(feature_frame_count(560, 16000) == 2);
  CHECK(feature_frame_count(4800, 16000) == 28);
  CHECK(feature_frame_count(9600, 16000) == 58);
  CHECK(a.rows() == feature_frame_count(wave.size(), 16000));
  CHECK(a.cols() == 32);

  // doubling the waveform roughly doubles the frame count
  std::vector<double> twice(wave.begin(), wave.end());
  twice.insert(twice.end(), wave.begin(), wave.end());
  Tensor c = extract_features(twice, 32, 16000);
  CHECK(c.rows() == feature_frame_count(2 * wave.size(), 16000));

  // finite, non-constant
  double lo = a.data()[0];
  double hi = a.data()[0];
  for (double v : a.data()) {
    REQUIRE(std::isfinite(v));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi > lo);

  CHECK_THROWS_AS(extract_features(std::vector<double>(100, 0.1), 32, 16000),
                  ContractError);
}

TEST_CASE("config files parse with comments and reject unknown keys") {
  ConfigMap cfg = ConfigMap::from_string(
      "# corpus\n"
      "train_size = 10\n"
      "dev_size=2   # inline comment\n"
      "  eval_size =  3\n"
      "\n",
      "<test>");
  CHECK(cfg.get_int("train_size") == 10);
  CHECK(cfg.get_int("dev_size") == 2);
  CHECK(cfg.get_int("eval_size") == 3);
  CHECK_NOTHROW(cfg.reject_unknown());

  ConfigMap extra = ConfigMap::from_string("foo = 1\nbar = 2\n", "<test>");
  CHECK(extra.get_int("foo") == 1);
  CHECK_THROWS_AS(extra.reject_unknown(), ConfigError);

  CHECK_THROWS_AS(ConfigMap::from_string("a = 1\na = 2\n"), ParseError);
  CHECK_THROWS_AS(ConfigMap::from_string("just text\n"), ParseError);
  ConfigMap types = ConfigMap::from_string("x = nope\n");
  CHECK_THROWS_AS(types.get_double("x"), ConfigError);
}

TEST_CASE("checkpoint round trip is byte-identical") {
  TempDir dir("ssdkan_ckpt_rt");
  Checkpoint ckpt;
  ckpt.config_text = "projector = mlp\ntarget_samples = 100\n";
  Rng rng(1);
  ckpt.arrays.emplace_back("w", Tensor::randn({3, 4}, rng));
  ckpt.arrays.emplace_back("b", Tensor::randn({4}, rng));
  ckpt.epoch = 7;
  ckpt.dev_loss = 0.125;
  const fs::path p1 = dir.path / "a.bin";
  const fs::path p2 = dir.path / "b.bin";
  save_checkpoint(p1, ckpt);
  Checkpoint loaded = load_checkpoint(p1);
  CHECK(loaded.config_text == ckpt.config_text);
  CHECK(loaded.epoch == 7);
  CHECK(loaded.dev_loss == 0.125);
  REQUIRE(loaded.arrays.size() == 2);
  CHECK(loaded.arrays[0].first == "w");
  CHECK(std::memcmp(loaded.arrays[0].second.data().data(),
                    ckpt.arrays[0].second.data().data(),
                    sizeof(double) * 12) == 0);
  save_checkpoint(p2, loaded);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoint loader reports corruption by field") {
  TempDir dir("ssdkan_ckpt_bad");
  Checkpoint ckpt;
  ckpt.config_text = "k = v\n";
  Rng rng(2);
  ckpt.arrays.emplace_back("w", Tensor::randn({2, 2}, rng));
  const fs::path good = dir.path / "good.bin";
  save_checkpoint(good, ckpt);
  auto bytes = slurp(good);

  {  // truncation
    std::ofstream out(dir.path / "trunc.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 10));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path / "trunc.bin"),
                       doctest::Contains("truncated"), IoError);

  {  // bad magic
    auto bad = bytes;
    bad[0] = 'X';
    std::ofstream out(dir.path / "magic.bin", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path / "magic.bin"),
                       doctest::Contains("magic"), IoError);

  {  // corrupt config text -> digest mismatch
    auto bad = bytes;
    bad[21] = 'q';  // inside the config text region (starts at byte 20)
    std::ofstream out(dir.path / "digest.bin", std::ios::binary);
    out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
  }
  CHECK_THROWS_WITH_AS(load_checkpoint(dir.path / "digest.bin"),
                       doctest::Contains("digest"), IoError);
}

TEST_CASE("early stopping fires exactly after `patience` stale epochs") {
  EarlyStopper s1(1);
  CHECK(!s1.observe(1.0));
  CHECK(s1.observe(1.1));  // patience 1, increasing from epoch 1 -> stop at 2

  EarlyStopper s2(2);
  CHECK(!s2.observe(1.0));
  CHECK(!s2.observe(0.9));   // improvement resets
  CHECK(!s2.observe(0.9));   // equal is not a strict improvement -> stale 1
  CHECK(s2.observe(0.95));   // stale 2 -> stop

  EarlyStopper s3(3);
  CHECK(!s3.observe(5.0));
  CHECK(!s3.observe(6.0));
  CHECK(!s3.observe(7.0));
  CHECK(s3.observe(8.0));
}

TEST_CASE("snapshot averaging is the elementwise mean") {
  std::vector<std::vector<std::vector<double>>> snaps = {
      {{1.0, 2.0}, {10.0}},
      {{3.0, 4.0}, {20.0}},
      {{5.0, 6.0}, {30.0}},
  };
  auto avg = average_snapshots(snaps);
  REQUIRE(avg.size() == 2);
  CHECK(avg[0] == std::vector<double>{3.0, 4.0});
  CHECK(avg[1] == std::vector<double>{20.0});
  CHECK(average_snapshots({snaps[0]}) == snaps[0]);  // N = 1 is the identity
  CHECK_THROWS_AS(average_snapshots({}), ContractError);
}

TEST_CASE("adam takes a step against the gradient") {
  Tensor w = Tensor::from_data({2}, {1.0, -1.0}, true);
  GradTape tape;
  {
    GradTape::Scope scope(tape);
    Tensor loss = sum(mul(w, w));
    tape.backward(loss);
  }
  AdamOptimizer opt({&w}, 0.1, 0.9, 0.999, 0.0);
  opt.step();
  CHECK(w.data()[0] < 1.0);
  CHECK(w.data()[1] > -1.0);
}

TEST_CASE("micro training run: determinism, checkpoints, evaluation") {
  TempDir dir("ssdkan_train_micro");
  Corpus corpus = generate_corpus(tiny_spec(), 21);
  TrainConfig cfg = tiny_train_config();

  TrainResult r1 = train_model(cfg, corpus, dir.path / "run1");
  TrainResult r2 = train_model(cfg, corpus, dir.path / "run2");
  REQUIRE(r1.history.size() == r2.history.size());
  for (size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].dev_loss == r2.history[i].dev_loss);
  }
  CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));

  // loaded model scores match the checkpoint bit for bit across reloads
  EvalOptions opt;
  opt.split = Split::Eval;
  EvalReport e1 = evaluate_checkpoints({r1.checkpoint_path}, corpus, opt);
  EvalReport e2 = evaluate_checkpoints({r1.checkpoint_path}, corpus, opt);
  REQUIRE(e1.scores.entries.size() == corpus.eval.size());
  for (size_t i = 0; i < e1.scores.entries.size(); ++i) {
    CHECK(e1.scores.entries[i].score == e2.scores.entries[i].score);
  }

  // fixed and variable length both produce one score per trial
  opt.variable_length = true;
  EvalReport ev = evaluate_checkpoints({r1.checkpoint_path}, corpus, opt);
  CHECK(ev.scores.entries.size() == corpus.eval.size());

  // a trial already at the target length scores identically in both modes
  Corpus probe = corpus;
  probe.eval[0].samples = pad_or_trim(probe.eval[0].samples,
                                      cfg.target_samples);
  opt.variable_length = false;
  EvalReport pf = evaluate_checkpoints({r1.checkpoint_path}, probe, opt);
  opt.variable_length = true;
  EvalReport pv = evaluate_checkpoints({r1.checkpoint_path}, probe, opt);
  CHECK(pf.scores.entries[0].score == pv.scores.entries[0].score);
}

TEST_CASE("training with top_n = 1 equals the best single checkpoint") {
  TempDir dir("ssdkan_train_topn");
  Corpus corpus = generate_corpus(tiny_spec(), 22);
  TrainConfig cfg = tiny_train_config();
  cfg.top_n = 1;
  TrainResult params_mode = train_model(cfg, corpus, dir.path / "params");
  cfg.average = "scores";
  TrainResult scores_mode = train_model(cfg, corpus, dir.path / "scores");
  // averaging one snapshot == that snapshot, so both modes save the same
  // primary checkpoint
  CHECK(slurp(params_mode.checkpoint_path) ==
        slurp(scores_mode.checkpoint_path));
  REQUIRE(scores_mode.snapshot_paths.size() == 1);
}

TEST_CASE("score-averaging eval over several checkpoints averages per trial") {
  TempDir dir("ssdkan_train_scoreavg");
  Corpus corpus = generate_corpus(tiny_spec(), 23);
  TrainConfig cfg = tiny_train_config();
  cfg.average = "scores";
  cfg.top_n = 2;
  cfg.max_epochs = 2;
  TrainResult r = train_model(cfg, corpus, dir.path / "run");
  REQUIRE(r.snapshot_paths.size() == 2);
  EvalOptions opt;
  opt.split = Split::Eval;
  EvalReport a = evaluate_checkpoints({r.snapshot_paths[0]}, corpus, opt);
  EvalReport b = evaluate_checkpoints({r.snapshot_paths[1]}, corpus, opt);
  EvalReport both =
      evaluate_checkpoints({r.snapshot_paths[0], r.snapshot_paths[1]}, corpus,
                           opt);
  for (size_t i = 0; i < both.scores.entries.size(); ++i) {
    const double mean =
        (a.scores.entries[i].score + b.scores.entries[i].score) / 2.0;
    CHECK(both.scores.entries[i].score == doctest::Approx(mean).epsilon(1e-15));
  }
}

TEST_CASE("dev loss falls below the initial value on a small run") {
  TempDir dir("ssdkan_train_progress");
  CorpusSpec spec = tiny_spec();
  spec.train_size = 48;
  Corpus corpus = generate_corpus(spec, 24);
  TrainConfig cfg = tiny_train_config();
  cfg.max_epochs = 6;
  TrainResult r = train_model(cfg, corpus, dir.path);
  REQUIRE(!r.history.empty());
  CHECK(r.best_dev_loss < r.history.front().dev_loss + 1e-12);
  double best = r.history.front().dev_loss;
  for (auto& e : r.history) best = std::min(best, e.dev_loss);
  CHECK(r.best_dev_loss == best);
}

TEST_CASE("training rejects an empty dev split") {
  Corpus corpus = generate_corpus(tiny_spec(), 25);
  corpus.dev.clear();
  CHECK_THROWS_AS(train_model(tiny_train_config(), corpus, "/tmp/ssdkan_x"),
                  TrainingError);
}

TEST_CASE("custom tdcf params file loads and caps the metric") {
  TempDir dir("ssdkan_tdcf");
  {
    std::ofstream out(dir.path / "tdcf.cfg");
    out << "p_target = 0.9405\np_nontarget = 0.0095\np_spoof = 0.05\n"
        << "cost_miss = 1\ncost_fa = 10\nasv_miss = 0\nasv_fa = 0\n"
        << "asv_spoof_fa = 1\n";
  }
  TdcfParams p = TdcfParams::from_file(dir.path / "tdcf.cfg");
  CHECK(p.p_target == 0.9405);
  CHECK(p.cost_fa == 10.0);
  {
    std::ofstream out(dir.path / "bad.cfg");
    out << "p_target = 0.9\nnot_a_key = 1\n";
  }
  CHECK_THROWS_AS(TdcfParams::from_file(dir.path / "bad.cfg"), ConfigError);
}
