// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment driver: synthetic bonafide/spoof corpus generation, a
// deterministic feature stub standing in for a pretrained speech encoder,
// the training loop, checkpoint serialization, and evaluation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssdkan/config.hpp"
#include "ssdkan/eval.hpp"
#include "ssdkan/model.hpp"
#include "ssdkan/tensor.hpp"

namespace ssdkan {

// ---- corpus ------------------------------------------------------------

enum class Split { Train, Dev, Eval };

std::string split_name(Split split);
Split split_from_name(const std::string& name);

struct CorpusSpec {
  int train_size = 2000;
  int dev_size = 500;
  int eval_size = 500;
  int sample_rate = 16000;
  // Trial durations are drawn from the grid {min, min+step, ..., max}.
  double duration_min = 0.3;
  double duration_max = 0.7;
  double duration_step = 0.1;
  double noise_level = 0.01;

  void validate() const;
  static CorpusSpec from_file(const std::filesystem::path& path);
  static CorpusSpec from_config(const ConfigMap& cfg);
};

struct TrialWave {
  std::string id;
  TrialLabel label = TrialLabel::Bonafide;
  // which artifact a spoof trial carries: notch, quantize, or phase; none
  // for bonafide
  std::string artifact = "none";
  std::vector<double> samples;  // values in [-1, 1]
};

struct Corpus {
  CorpusSpec spec;
  uint64_t seed = 0;
  std::vector<TrialWave> train;
  std::vector<TrialWave> dev;
  std::vector<TrialWave> eval;

  const std::vector<TrialWave>& split(Split s) const;
};

// Bonafide trials are harmonic stacks with slow amplitude envelopes and a
// small noise floor; spoof trials get one injected artifact (spectral notch,
// 4-bit quantization, or periodic phase discontinuity). Deterministic per
// (spec, seed); labels alternate so each split stays balanced.
Corpus generate_corpus(const CorpusSpec& spec, uint64_t seed);

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

// Longer inputs are truncated; shorter ones are repeat-tiled then truncated.
std::vector<double> pad_or_trim(std::span<const double> wave,
                                int64_t target_samples);

// ---- feature stub --------------------------------------------------------

// 25 ms window / 10 ms hop log filterbank energies pushed through a fixed
// seeded random projection to `feature_dim` channels. Returns frames x dim.
Tensor extract_features(std::span<const double> wave, int feature_dim,
                        int sample_rate);
int64_t feature_frame_count(int64_t samples, int sample_rate);

// ---- checkpoints -----------------------------------------------------

struct Checkpoint {
  std::string config_text;
  std::vector<std::pair<std::string, Tensor>> arrays;
  uint32_t epoch = 0;
  double dev_loss = 0.0;
};

uint64_t fnv1a64(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ---- optimizer ---------------------------------------------------------

class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Tensor*> params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double weight_decay = 0.0,
                double eps = 1e-8);
  // Applies one update from the accumulated gradients. Weight decay is added
  // to the gradient (L2 regularization).
  void step();

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  double lr_, beta1_, beta2_, weight_decay_, eps_;
  int64_t t_ = 0;
};

// ---- training ------------------------------------------------------------

struct TrainConfig {
  ModelConfig model;
  double lr = 1e-3;  // the full-scale protocol uses 1e-6, see configs/
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 1e-4;
  int batch_size = 16;
  int max_epochs = 30;
  int patience = 7;
  int top_n = 5;
  int64_t target_samples = 64000;
  uint64_t seed = 1;
  std::string average = "params";  // params | scores

  void validate() const;
  static TrainConfig from_file(const std::filesystem::path& path);
  static TrainConfig from_config(const ConfigMap& cfg);
  // Everything evaluation needs to rebuild the model; embedded in the
  // checkpoint and covered by its digest.
  std::string checkpoint_config_text() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint_path;
  // Extra per-snapshot checkpoints, written in score-averaging mode.
  std::vector<std::filesystem::path> snapshot_paths;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_dev_loss = 0.0;
  bool early_stopped = false;
};

// Cross-entropy training with Adam, per-epoch dev loss, early stopping on
// `patience` epochs without strict improvement, and top-N snapshot averaging
// (parameter mean by default). Fully deterministic given (config, corpus).
TrainResult train_model(const TrainConfig& config, const Corpus& corpus,
                        const std::filesystem::path& out_dir,
                        std::ostream* log = nullptr);

// Tracks best-so-far dev loss; fires after `patience` consecutive epochs
// without strict improvement.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience);
  // Returns true when training should stop after this epoch.
  bool observe(double dev_loss);
  double best() const { return best_; }
  int stale_epochs() const { return stale_; }

 private:
  int patience_;
  int stale_ = 0;
  double best_;
  bool seen_ = false;
};

// Elementwise mean of equally-shaped parameter snapshots.
std::vector<std::vector<double>> average_snapshots(
    const std::vector<std::vector<std::vector<double>>>& snapshots);

// ---- evaluation ------------------------------------------------------

struct EvalOptions {
  Split split = Split::Eval;
  bool variable_length = false;
  std::optional<TdcfParams> tdcf;
  std::optional<std::filesystem::path> scores_out;
  std::optional<std::filesystem::path> labels_out;
};

struct EvalReport {
  TrialScores scores;
  EerResult eer;
  std::optional<double> min_tdcf;
};

// Scores every trial of the split. Fixed-length mode pads/trims waveforms to
// the checkpoint's training target; variable-length mode feeds full-length
// features one trial at a time. Passing several checkpoints averages their
// scores per trial (score-averaging mode).
EvalReport evaluate_checkpoints(
    const std::vector<std::filesystem::path>& checkpoint_paths,
    const Corpus& corpus, const EvalOptions& options);

// Rebuilds the model (and the training target length) from a checkpoint.
std::pair<SsdModel, int64_t> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace ssdkan
