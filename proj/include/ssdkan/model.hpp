// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Binary spoofing classifier: a projector (MLP, GR-KAN, or KAN, each followed
// by SeLU) maps per-frame features to the model width, a learnable
// classification token is prepended, a stack of Conformer blocks encodes the
// sequence, and a linear head reads the classification token. The detection
// score is logit(bonafide) - logit(spoof).
//
// Sequences are carried as rank-2 tensors with rows grouped by trial:
// row b * frames + t holds frame t of trial b.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ssdkan/config.hpp"
#include "ssdkan/grkan.hpp"
#include "ssdkan/kan.hpp"
#include "ssdkan/tensor.hpp"

namespace ssdkan {

enum class ProjectorKind { Mlp, GrKan, Kan };

std::string projector_kind_name(ProjectorKind kind);
ProjectorKind projector_kind_from_name(const std::string& name);

struct ProjectorConfig {
  ProjectorKind kind = ProjectorKind::Mlp;
  int feature_dim = 128;  // D
  int model_dim = 64;     // D'
  // grkan
  int grkan_groups = 8;
  int grkan_num_order = 5;
  int grkan_den_order = 4;
  std::string grkan_init = "silu";  // silu | identity
  // kan
  double kan_t_min = -3.0;
  double kan_t_max = 3.0;
  int kan_intervals = 5;
  int kan_order = 3;

  void validate() const;
};

struct ConformerConfig {
  int blocks = 2;  // L
  int model_dim = 64;
  int heads = 4;
  int conv_kernel = 15;
  int ffn_expansion = 4;
  double dropout = 0.1;
  bool positional_encoding = false;

  void validate() const;
};

struct ModelConfig {
  ProjectorConfig projector;
  ConformerConfig encoder;

  void validate() const;
  // Sorted key=value lines; the checkpoint digest is computed over this.
  std::string canonical_text() const;
  static ModelConfig from_config(const ConfigMap& cfg);
};

// One Conformer block: half-step FFN, self-attention, convolution module,
// half-step FFN, final layer norm, all pre-norm with residuals. The conv
// module uses layer norm rather than batch norm.
struct ConformerBlock {
  ConformerBlock(const ConformerConfig& cfg, Rng& rng);

  Tensor ffn1_ln_g, ffn1_ln_b, ffn1_w1, ffn1_b1, ffn1_w2, ffn1_b2;
  Tensor mhsa_ln_g, mhsa_ln_b, wq, bq, wk, wv, bv, wo, bo;
  Tensor conv_ln_g, conv_ln_b, conv_pw1_w, conv_pw1_b, conv_dw_w, conv_dw_b,
      conv_norm_g, conv_norm_b, conv_pw2_w, conv_pw2_b;
  Tensor ffn2_ln_g, ffn2_ln_b, ffn2_w1, ffn2_b1, ffn2_w2, ffn2_b2;
  Tensor final_ln_g, final_ln_b;

  int model_dim;
  int heads;
  int conv_kernel;
  double dropout_rate;

  struct Ctx {
    bool training = false;
    Rng* rng = nullptr;
  };

  Tensor forward(const Tensor& x, int64_t batch, int64_t seq,
                 const Ctx& ctx) const;
  // Attention sublayer without residual or pre-norm; exposed for testing.
  Tensor mhsa(const Tensor& x, int64_t batch, int64_t seq,
              const Ctx& ctx) const;

  std::vector<std::pair<std::string, Tensor*>> named_parameters(
      const std::string& prefix);
};

class SsdModel {
 public:
  explicit SsdModel(ModelConfig cfg);  // zero parameters (checkpoint target)
  static SsdModel init(ModelConfig cfg, uint64_t seed);

  using Ctx = ConformerBlock::Ctx;

  // The classification token goes at sequence position 0.
  static constexpr int64_t kClsIndex = 0;

  // (batch*frames) x D -> (batch*frames) x D', SeLU(projector(x)) per frame.
  Tensor project(const Tensor& features) const;
  // Prepends the token to every trial: (batch*frames) x D' ->
  // (batch*(frames+1)) x D'. frames == 0 yields one token row per trial and
  // ignores x.
  Tensor prepend_cls(const Tensor& x, int64_t batch, int64_t frames) const;
  Tensor encode(const Tensor& x, int64_t batch, int64_t seq,
                const Ctx& ctx) const;
  // Reads the token state: (batch*seq) x D' -> batch x 2 logits.
  Tensor classify(const Tensor& encoded, int64_t batch, int64_t seq) const;

  Tensor forward_logits(const Tensor& features, int64_t batch, int64_t frames,
                        const Ctx& ctx = {}) const;
  // Deterministic eval-mode scores, one per trial, bonafide minus spoof.
  std::vector<double> forward_scores(const Tensor& features, int64_t batch,
                                     int64_t frames) const;

  static double score_from_logits(double bonafide_logit, double spoof_logit) {
    return bonafide_logit - spoof_logit;
  }
  // Class indices in the logit row.
  static constexpr int kBonafideClass = 0;
  static constexpr int kSpoofClass = 1;

  const ModelConfig& config() const { return cfg_; }
  ProjectorKind projector_kind() const { return cfg_.projector.kind; }

  GrKanLayer* grkan_projector() { return grkan_ ? grkan_.get() : nullptr; }
  KanLayer* kan_projector() { return kan_ ? kan_.get() : nullptr; }
  Tensor& mlp_weight() { return mlp_w_; }
  Tensor& mlp_bias() { return mlp_b_; }
  Tensor& cls_token() { return cls_; }

  // Replaces the projector with a GR-KAN layer loaded from the given linear
  // weights (shape D x D'); used for MLP-to-GR-KAN transfer.
  void load_grkan_projector_from_mlp(const Tensor& weight, const Tensor& bias,
                                     int groups);

  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<Tensor*> parameters();
  void zero_grad();

 private:
  ModelConfig cfg_;
  // projector storage; exactly one is active per `kind`
  Tensor mlp_w_, mlp_b_;
  std::unique_ptr<GrKanLayer> grkan_;
  std::unique_ptr<KanLayer> kan_;
  Tensor cls_;
  std::vector<ConformerBlock> blocks_;
  Tensor head_w_, head_b_;
};

}  // namespace ssdkan
