// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssdkan/gradcheck.hpp"
#include "ssdkan/harness.hpp"
#include "ssdkan/kernels.hpp"

namespace {

using namespace ssdkan;

std::vector<std::filesystem::path> split_paths(const std::string& arg) {
  std::vector<std::filesystem::path> out;
  size_t pos = 0;
  while (pos <= arg.size()) {
    const size_t comma = arg.find(',', pos);
    const std::string part =
        arg.substr(pos, comma == std::string::npos ? std::string::npos
                                                   : comma - pos);
    if (!part.empty()) out.emplace_back(part);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ContractError("no checkpoint path given");
  return out;
}

int cmd_gen_data(const std::string& spec_path, uint64_t seed,
                 const std::string& out_dir) {
  CorpusSpec spec = CorpusSpec::from_file(spec_path);
  Corpus corpus = generate_corpus(spec, seed);
  write_corpus(corpus, out_dir);
  std::printf("wrote corpus to %s (train %zu, dev %zu, eval %zu trials)\n",
              out_dir.c_str(), corpus.train.size(), corpus.dev.size(),
              corpus.eval.size());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir) {
  TrainConfig config = TrainConfig::from_file(config_path);
  Corpus corpus = read_corpus(data_dir);
  TrainResult result = train_model(config, corpus, out_dir, &std::cout);
  std::printf("checkpoint: %s (best epoch %d, dev loss %.6f)\n",
              result.checkpoint_path.c_str(), result.best_epoch,
              result.best_dev_loss);
  return 0;
}

int cmd_eval(const std::string& checkpoint_arg, const std::string& data_dir,
             const std::string& split, const std::string& mode,
             const std::string& tdcf_path, const std::string& scores_out,
             const std::string& labels_out) {
  if (mode != "fix" && mode != "var") {
    throw ContractError("eval: mode must be fix or var");
  }
  EvalOptions options;
  options.split = split_from_name(split);
  options.variable_length = mode == "var";
  if (!tdcf_path.empty()) options.tdcf = TdcfParams::from_file(tdcf_path);
  auto checkpoints = split_paths(checkpoint_arg);
  std::filesystem::path scores_path =
      scores_out.empty()
          ? checkpoints[0].parent_path() /
                ("scores_" + split + "_" + mode + ".txt")
          : std::filesystem::path(scores_out);
  options.scores_out = scores_path;
  if (!labels_out.empty()) options.labels_out = labels_out;
  Corpus corpus = read_corpus(data_dir);
  EvalReport report = evaluate_checkpoints(checkpoints, corpus, options);
  std::printf("scored %zu trials (%s, %s mode)\n", report.scores.entries.size(),
              split.c_str(), mode.c_str());
  std::printf("EER: %.4f%%  (threshold %.6g)\n", 100.0 * report.eer.eer,
              report.eer.threshold);
  if (report.min_tdcf.has_value()) {
    std::printf("min t-DCF: %.4f\n", *report.min_tdcf);
  }
  std::printf("scores written to %s\n", scores_path.c_str());
  return 0;
}

int cmd_metrics(const std::string& scores_path, const std::string& labels_path,
                const std::string& tdcf_path) {
  TrialScores scores = join_scores_labels(read_score_file(scores_path),
                                          read_label_file(labels_path));
  EerResult eer = compute_eer(scores);
  std::printf("trials: %zu (%lld bonafide, %lld spoof)\n",
              scores.entries.size(),
              static_cast<long long>(scores.count(TrialLabel::Bonafide)),
              static_cast<long long>(scores.count(TrialLabel::Spoof)));
  std::printf("EER: %.4f%%  (threshold %.6g)\n", 100.0 * eer.eer,
              eer.threshold);
  if (!tdcf_path.empty()) {
    const double tdcf =
        compute_min_tdcf(scores, TdcfParams::from_file(tdcf_path));
    std::printf("min t-DCF: %.4f\n", tdcf);
  }
  return 0;
}

int cmd_gradcheck(const std::string& module) {
  std::printf("kernel lane: %s\n",
              std::string(kernels::lane_name(kernels::active_lane())).c_str());
  auto items = gradcheck_battery(module);
  bool all_pass = true;
  for (const auto& item : items) {
    std::printf("[%s] %-32s max rel err %.3e (limit %.0e)\n",
                item.pass ? "PASS" : "FAIL", item.name.c_str(),
                item.max_rel_error, item.threshold);
    all_pass = all_pass && item.pass;
  }
  if (!all_pass) {
    std::fprintf(stderr, "ssdkan: gradient check failed\n");
    return 1;
  }
  std::printf("all %zu gradient checks passed\n", items.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAN / GR-KAN layers with a synthetic-speech-detection "
               "training harness"};
  app.require_subcommand(1);

  std::string spec_path, out_dir, config_path, data_dir;
  uint64_t seed = 1;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  gen->add_option("--spec", spec_path, "corpus spec file")->required();
  gen->add_option("--seed", seed, "corpus seed")->required();
  gen->add_option("--out", out_dir, "output directory")->required();

  std::string train_config, train_data, train_out;
  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--config", train_config, "training config file")
      ->required();
  train->add_option("--data", train_data, "corpus directory")->required();
  train->add_option("--out", train_out, "output directory")->required();

  std::string eval_ckpt, eval_data, eval_split = "eval", eval_mode = "fix",
              eval_tdcf, eval_scores_out, eval_labels_out;
  auto* evalc = app.add_subcommand("eval", "score a corpus split");
  evalc->add_option("--checkpoint", eval_ckpt,
                    "checkpoint path (comma-separated list averages scores)")
      ->required();
  evalc->add_option("--data", eval_data, "corpus directory")->required();
  evalc->add_option("--split", eval_split, "train, dev, or eval");
  evalc->add_option("--mode", eval_mode, "fix (pad/trim) or var (full length)");
  evalc->add_option("--tdcf-params", eval_tdcf, "t-DCF parameter file");
  evalc->add_option("--scores-out", eval_scores_out, "score file destination");
  evalc->add_option("--labels-out", eval_labels_out,
                    "also write the companion label file here");

  std::string metrics_scores, metrics_labels, metrics_tdcf;
  auto* metrics = app.add_subcommand("metrics", "compute EER / min t-DCF");
  metrics->add_option("--scores", metrics_scores, "score file")->required();
  metrics->add_option("--labels", metrics_labels, "label file")->required();
  metrics->add_option("--tdcf-params", metrics_tdcf, "t-DCF parameter file");

  std::string gc_module = "all";
  auto* gc = app.add_subcommand("gradcheck", "finite-difference checks");
  gc->add_option("--module", gc_module, "all, kan, grkan, or model");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(spec_path, seed, out_dir);
    if (train->parsed()) return cmd_train(train_config, train_data, train_out);
    if (evalc->parsed()) {
      return cmd_eval(eval_ckpt, eval_data, eval_split, eval_mode, eval_tdcf,
                      eval_scores_out, eval_labels_out);
    }
    if (metrics->parsed()) {
      return cmd_metrics(metrics_scores, metrics_labels, metrics_tdcf);
    }
    if (gc->parsed()) return cmd_gradcheck(gc_module);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "ssdkan: %s\n", e.what());
    return 1;
  }
  return 0;
}
