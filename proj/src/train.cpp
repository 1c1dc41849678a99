// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>

#include "ssdkan/harness.hpp"

namespace ssdkan {

// ---- Adam ------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::vector<Tensor*> params, double lr,
                             double beta1, double beta2, double weight_decay,
                             double eps)
    : params_(std::move(params)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      weight_decay_(weight_decay),
      eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Tensor* p : params_) {
    m_.emplace_back(p->numel(), 0.0);
    v_.emplace_back(p->numel(), 0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t pi = 0; pi < params_.size(); ++pi) {
    Tensor* p = params_[pi];
    auto theta = p->mutable_data();
    const bool has_grad = p->has_grad();
    auto grad = has_grad ? p->grad() : std::span<const double>();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (size_t i = 0; i < theta.size(); ++i) {
      const double g =
          (has_grad ? grad[i] : 0.0) + weight_decay_ * theta[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---- config ------------------------------------------------------------

void TrainConfig::validate() const {
  model.validate();
  if (!(lr > 0.0)) throw ConfigError("train: lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
  if (top_n < 1) throw ConfigError("train: top_n must be >= 1");
  if (target_samples < 1) {
    throw ConfigError("train: target_samples must be >= 1");
  }
  if (average != "params" && average != "scores") {
    throw ConfigError("train: average must be params or scores");
  }
}

TrainConfig TrainConfig::from_config(const ConfigMap& cfg) {
  TrainConfig t;
  t.model = ModelConfig::from_config(cfg);
  t.lr = cfg.get_double("lr", t.lr);
  t.beta1 = cfg.get_double("beta1", t.beta1);
  t.beta2 = cfg.get_double("beta2", t.beta2);
  t.weight_decay = cfg.get_double("weight_decay", t.weight_decay);
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.max_epochs = static_cast<int>(cfg.get_int("max_epochs", t.max_epochs));
  t.patience = static_cast<int>(cfg.get_int("patience", t.patience));
  t.top_n = static_cast<int>(cfg.get_int("top_n", t.top_n));
  t.target_samples = cfg.get_int("target_samples", t.target_samples);
  t.seed = cfg.get_u64("seed", t.seed);
  t.average = cfg.get_string("average", t.average);
  t.validate();
  return t;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  ConfigMap cfg = ConfigMap::from_file(path);
  TrainConfig t = from_config(cfg);
  cfg.reject_unknown();
  return t;
}

std::string TrainConfig::checkpoint_config_text() const {
  return model.canonical_text() + "target_samples = " +
         std::to_string(target_samples) + "\n";
}

// ---- early stopping / averaging ------------------------------------------

EarlyStopper::EarlyStopper(int patience) : patience_(patience), best_(0.0) {
  if (patience < 1) throw ContractError("early stopping: patience must be >= 1");
}

bool EarlyStopper::observe(double dev_loss) {
  if (!seen_ || dev_loss < best_) {
    best_ = dev_loss;
    seen_ = true;
    stale_ = 0;
    return false;
  }
  ++stale_;
  return stale_ >= patience_;
}

std::vector<std::vector<double>> average_snapshots(
    const std::vector<std::vector<std::vector<double>>>& snapshots) {
  if (snapshots.empty()) {
    throw ContractError("average_snapshots: no snapshots");
  }
  const size_t n_params = snapshots[0].size();
  std::vector<std::vector<double>> out(n_params);
  const double inv = 1.0 / static_cast<double>(snapshots.size());
  for (size_t p = 0; p < n_params; ++p) {
    out[p].assign(snapshots[0][p].size(), 0.0);
    for (const auto& snap : snapshots) {
      if (snap.size() != n_params || snap[p].size() != out[p].size()) {
        throw ContractError("average_snapshots: shape mismatch");
      }
      for (size_t i = 0; i < out[p].size(); ++i) out[p][i] += snap[p][i];
    }
    for (double& v : out[p]) v *= inv;
  }
  return out;
}

// ---- training loop ---------------------------------------------------

namespace {

struct FeatureSet {
  std::vector<double> data;  // trials x frames x dim, contiguous
  std::vector<int> labels;   // class index per trial
  int64_t frames = 0;
  int dim = 0;
  int64_t trials = 0;
};

FeatureSet featurize_fixed(const std::vector<TrialWave>& split,
                           int64_t target_samples, int feature_dim,
                           int sample_rate) {
  FeatureSet fs;
  fs.dim = feature_dim;
  fs.trials = static_cast<int64_t>(split.size());
  for (int64_t i = 0; i < fs.trials; ++i) {
    const std::vector<double> wave =
        pad_or_trim(split[i].samples, target_samples);
    Tensor feats = extract_features(wave, feature_dim, sample_rate);
    if (i == 0) {
      fs.frames = feats.rows();
      fs.data.reserve(static_cast<size_t>(fs.trials) * fs.frames * fs.dim);
    }
    fs.data.insert(fs.data.end(), feats.data().begin(), feats.data().end());
    fs.labels.push_back(split[i].label == TrialLabel::Bonafide
                            ? SsdModel::kBonafideClass
                            : SsdModel::kSpoofClass);
  }
  return fs;
}

Tensor gather_batch(const FeatureSet& fs, std::span<const int64_t> idx) {
  const size_t stride = static_cast<size_t>(fs.frames) * fs.dim;
  std::vector<double> data(idx.size() * stride);
  for (size_t b = 0; b < idx.size(); ++b) {
    std::copy_n(fs.data.data() + static_cast<size_t>(idx[b]) * stride, stride,
                data.data() + b * stride);
  }
  return Tensor::from_data(
      {static_cast<int64_t>(idx.size()) * fs.frames, fs.dim},
      std::move(data));
}

double dataset_loss(const SsdModel& model, const FeatureSet& fs,
                    int batch_size) {
  double total = 0.0;
  int64_t done = 0;
  while (done < fs.trials) {
    const int64_t b = std::min<int64_t>(batch_size, fs.trials - done);
    std::vector<int64_t> idx(b);
    std::iota(idx.begin(), idx.end(), done);
    Tensor feats = gather_batch(fs, idx);
    Tensor logits = model.forward_logits(feats, b, fs.frames);
    std::vector<int> labels(fs.labels.begin() + done,
                            fs.labels.begin() + done + b);
    total += softmax_cross_entropy(logits, labels).item() *
             static_cast<double>(b);
    done += b;
  }
  return total / static_cast<double>(fs.trials);
}

struct Snapshot {
  double dev_loss = 0.0;
  int epoch = 0;
  std::vector<std::vector<double>> params;
};

Checkpoint checkpoint_from_params(
    SsdModel& model, const std::vector<std::vector<double>>& params,
    const std::string& config_text, uint32_t epoch, double dev_loss) {
  Checkpoint ckpt;
  ckpt.config_text = config_text;
  auto named = model.named_parameters();
  if (params.size() != named.size()) {
    throw ContractError("checkpoint: parameter count mismatch");
  }
  for (size_t i = 0; i < named.size(); ++i) {
    ckpt.arrays.emplace_back(
        named[i].first,
        Tensor::from_data(named[i].second->shape(), params[i]));
  }
  ckpt.epoch = epoch;
  ckpt.dev_loss = dev_loss;
  return ckpt;
}

std::vector<std::vector<double>> snapshot_params(SsdModel& model) {
  std::vector<std::vector<double>> out;
  for (Tensor* p : model.parameters()) {
    out.emplace_back(p->data().begin(), p->data().end());
  }
  return out;
}

void restore_params(SsdModel& model, const std::vector<std::vector<double>>& params) {
  auto ptrs = model.parameters();
  if (ptrs.size() != params.size()) {
    throw ContractError("restore: parameter count mismatch");
  }
  for (size_t i = 0; i < ptrs.size(); ++i) {
    if (static_cast<int64_t>(params[i].size()) != ptrs[i]->numel()) {
      throw ContractError("restore: parameter size mismatch");
    }
    std::copy(params[i].begin(), params[i].end(),
              ptrs[i]->mutable_data().begin());
  }
}

}  // namespace

TrainResult train_model(const TrainConfig& config, const Corpus& corpus,
                        const std::filesystem::path& out_dir,
                        std::ostream* log) {
  config.validate();
  if (corpus.train.empty() || corpus.dev.empty()) {
    throw TrainingError("training requires non-empty train and dev splits");
  }
  std::filesystem::create_directories(out_dir);

  Rng rng(config.seed);
  SsdModel model = SsdModel::init(config.model, rng.fork(1).seed());
  Rng order_rng = rng.fork(2);
  Rng dropout_rng = rng.fork(3);

  const int sr = corpus.spec.sample_rate;
  const int fd = config.model.projector.feature_dim;
  FeatureSet train_fs =
      featurize_fixed(corpus.train, config.target_samples, fd, sr);
  FeatureSet dev_fs = featurize_fixed(corpus.dev, config.target_samples, fd, sr);

  AdamOptimizer adam(model.parameters(), config.lr, config.beta1, config.beta2,
                     config.weight_decay);
  EarlyStopper stopper(config.patience);
  std::vector<Snapshot> top;  // sorted by (dev_loss, epoch) ascending
  TrainResult result;

  std::ofstream log_file(out_dir / "training_log.txt", std::ios::binary);
  auto log_line = [&](const std::string& line) {
    log_file << line << "\n";
    if (log != nullptr) (*log) << line << "\n";
  };

  {
    int64_t n_params = 0;
    for (Tensor* p : model.parameters()) n_params += p->numel();
    std::string line = "model: " +
                       projector_kind_name(config.model.projector.kind) +
                       " projector, " + std::to_string(n_params) +
                       " parameters";
    if (const GrKanLayer* proj = model.grkan_projector()) {
      char gain[48];
      std::snprintf(gain, sizeof(gain), ", init gain %.6f",
                    proj->init_gain());
      line += gain;
    }
    log_line(line);
  }

  std::vector<int64_t> order(train_fs.trials);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    // Fisher-Yates with the dedicated stream
    for (int64_t i = train_fs.trials - 1; i > 0; --i) {
      const int64_t j = static_cast<int64_t>(order_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
    double train_loss_sum = 0.0;
    int64_t seen = 0;
    for (int64_t start = 0; start < train_fs.trials;
         start += config.batch_size) {
      const int64_t b =
          std::min<int64_t>(config.batch_size, train_fs.trials - start);
      std::span<const int64_t> idx(order.data() + start, b);
      Tensor feats = gather_batch(train_fs, idx);
      std::vector<int> labels(b);
      for (int64_t i = 0; i < b; ++i) labels[i] = train_fs.labels[idx[i]];

      GradTape tape;
      Tensor loss;
      {
        GradTape::Scope scope(tape);
        SsdModel::Ctx ctx{true, &dropout_rng};
        Tensor logits = model.forward_logits(feats, b, train_fs.frames, ctx);
        loss = softmax_cross_entropy(logits, labels);
      }
      const double loss_v = loss.item();
      if (!std::isfinite(loss_v)) {
        throw TrainingError("training diverged (non-finite loss) at epoch " +
                            std::to_string(epoch));
      }
      train_loss_sum += loss_v * static_cast<double>(b);
      seen += b;
      model.zero_grad();
      tape.backward(loss);
      adam.step();
    }
    const double train_loss = train_loss_sum / static_cast<double>(seen);
    const double dev_loss = dataset_loss(model, dev_fs, config.batch_size);
    if (!std::isfinite(dev_loss)) {
      throw TrainingError("training diverged (non-finite dev loss) at epoch " +
                          std::to_string(epoch));
    }
    result.history.push_back({epoch, train_loss, dev_loss});
    {
      char line[160];
      std::snprintf(line, sizeof(line),
                    "epoch %3d  train_loss %.6f  dev_loss %.6f", epoch,
                    train_loss, dev_loss);
      log_line(line);
    }

    Snapshot snap;
    snap.dev_loss = dev_loss;
    snap.epoch = epoch;
    snap.params = snapshot_params(model);
    auto pos = std::upper_bound(top.begin(), top.end(), snap,
                                [](const Snapshot& a, const Snapshot& b) {
                                  if (a.dev_loss != b.dev_loss) {
                                    return a.dev_loss < b.dev_loss;
                                  }
                                  return a.epoch < b.epoch;
                                });
    top.insert(pos, std::move(snap));
    if (static_cast<int>(top.size()) > config.top_n) top.resize(config.top_n);

    if (stopper.observe(dev_loss)) {
      result.early_stopped = true;
      log_line("early stop: dev loss stale for " +
               std::to_string(stopper.stale_epochs()) + " epochs");
      break;
    }
  }

  result.best_epoch = top.front().epoch;
  result.best_dev_loss = top.front().dev_loss;

  const std::string config_text = config.checkpoint_config_text();
  if (config.average == "params") {
    std::vector<std::vector<std::vector<double>>> param_sets;
    param_sets.reserve(top.size());
    for (const auto& s : top) param_sets.push_back(s.params);
    restore_params(model, average_snapshots(param_sets));
    result.checkpoint_path = out_dir / "checkpoint.bin";
    save_checkpoint(result.checkpoint_path,
                    checkpoint_from_params(model, snapshot_params(model),
                                           config_text,
                                           static_cast<uint32_t>(result.best_epoch),
                                           result.best_dev_loss));
  } else {
    // score averaging: the best snapshot is the primary checkpoint and every
    // retained snapshot is written alongside for eval-time score averaging
    restore_params(model, top.front().params);
    result.checkpoint_path = out_dir / "checkpoint.bin";
    save_checkpoint(result.checkpoint_path,
                    checkpoint_from_params(model, top.front().params,
                                           config_text,
                                           static_cast<uint32_t>(top.front().epoch),
                                           top.front().dev_loss));
    for (size_t i = 0; i < top.size(); ++i) {
      auto path = out_dir / ("checkpoint_top" + std::to_string(i + 1) + ".bin");
      save_checkpoint(path, checkpoint_from_params(
                                model, top[i].params, config_text,
                                static_cast<uint32_t>(top[i].epoch),
                                top[i].dev_loss));
      result.snapshot_paths.push_back(path);
    }
  }
  log_line("best epoch " + std::to_string(result.best_epoch) +
           ", checkpoint " + result.checkpoint_path.string());
  return result;
}

// ---- evaluation ------------------------------------------------------

std::pair<SsdModel, int64_t> model_from_checkpoint(const Checkpoint& ckpt) {
  ConfigMap cfg = ConfigMap::from_string(ckpt.config_text, "<checkpoint>");
  ModelConfig mc = ModelConfig::from_config(cfg);
  const int64_t target = cfg.get_int("target_samples");
  cfg.reject_unknown();
  SsdModel model(mc);
  auto named = model.named_parameters();
  if (named.size() != ckpt.arrays.size()) {
    throw IoError("checkpoint: expected " + std::to_string(named.size()) +
                  " parameter arrays, found " +
                  std::to_string(ckpt.arrays.size()));
  }
  for (size_t i = 0; i < named.size(); ++i) {
    const auto& [name, tensor] = ckpt.arrays[i];
    if (name != named[i].first) {
      throw IoError("checkpoint: parameter '" + name + "' does not match '" +
                    named[i].first + "'");
    }
    if (tensor.shape() != named[i].second->shape()) {
      throw IoError("checkpoint: parameter '" + name + "' has shape " +
                    shape_str(tensor.shape()) + ", expected " +
                    shape_str(named[i].second->shape()));
    }
    std::copy(tensor.data().begin(), tensor.data().end(),
              named[i].second->mutable_data().begin());
  }
  return {std::move(model), target};
}

EvalReport evaluate_checkpoints(
    const std::vector<std::filesystem::path>& checkpoint_paths,
    const Corpus& corpus, const EvalOptions& options) {
  if (checkpoint_paths.empty()) {
    throw ContractError("evaluate: no checkpoints given");
  }
  std::vector<SsdModel> models;
  int64_t target = 0;
  for (const auto& path : checkpoint_paths) {
    auto [model, t] = model_from_checkpoint(load_checkpoint(path));
    if (!models.empty() && t != target) {
      throw IoError("evaluate: checkpoints disagree on target_samples");
    }
    target = t;
    models.push_back(std::move(model));
  }
  const auto& trials = corpus.split(options.split);
  if (trials.empty()) throw ContractError("evaluate: empty split");
  const int sr = corpus.spec.sample_rate;
  const int fd = models[0].config().projector.feature_dim;

  TrialScores scores;
  scores.entries.resize(trials.size());
  if (!options.variable_length) {
    // fixed mode: every trial shares one frame count; batch for speed
    constexpr int64_t kBatch = 32;
    int64_t done = 0;
    const int64_t n = static_cast<int64_t>(trials.size());
    while (done < n) {
      const int64_t b = std::min<int64_t>(kBatch, n - done);
      std::vector<double> flat;
      int64_t frames = 0;
      for (int64_t i = 0; i < b; ++i) {
        Tensor f = extract_features(
            pad_or_trim(trials[done + i].samples, target), fd, sr);
        frames = f.rows();
        flat.insert(flat.end(), f.data().begin(), f.data().end());
      }
      Tensor feats =
          Tensor::from_data({b * frames, fd}, std::move(flat));
      std::vector<double> batch_scores;
      for (auto& model : models) {
        auto s = model.forward_scores(feats, b, frames);
        if (batch_scores.empty()) {
          batch_scores = std::move(s);
        } else {
          for (int64_t i = 0; i < b; ++i) batch_scores[i] += s[i];
        }
      }
      for (int64_t i = 0; i < b; ++i) {
        scores.entries[done + i] = {
            trials[done + i].id,
            batch_scores[i] / static_cast<double>(models.size()),
            trials[done + i].label};
      }
      done += b;
    }
  } else {
    for (size_t i = 0; i < trials.size(); ++i) {
      Tensor f = extract_features(trials[i].samples, fd, sr);
      double acc = 0.0;
      for (auto& model : models) {
        acc += model.forward_scores(f, 1, f.rows())[0];
      }
      scores.entries[i] = {trials[i].id,
                           acc / static_cast<double>(models.size()),
                           trials[i].label};
    }
  }

  EvalReport report;
  report.eer = compute_eer(scores);
  if (options.tdcf.has_value()) {
    report.min_tdcf = compute_min_tdcf(scores, *options.tdcf);
  }
  if (options.scores_out.has_value()) {
    write_scores(*options.scores_out, scores);
  }
  if (options.labels_out.has_value()) {
    write_labels(*options.labels_out, scores);
  }
  report.scores = std::move(scores);
  return report;
}

}  // namespace ssdkan
