// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/model.hpp"

#include <cmath>
#include <sstream>

namespace ssdkan {

std::string projector_kind_name(ProjectorKind kind) {
  switch (kind) {
    case ProjectorKind::Mlp:
      return "mlp";
    case ProjectorKind::GrKan:
      return "grkan";
    case ProjectorKind::Kan:
      return "kan";
  }
  return "mlp";
}

ProjectorKind projector_kind_from_name(const std::string& name) {
  if (name == "mlp") return ProjectorKind::Mlp;
  if (name == "grkan") return ProjectorKind::GrKan;
  if (name == "kan") return ProjectorKind::Kan;
  throw ConfigError("unknown projector kind '" + name +
                    "' (expected mlp, grkan, or kan)");
}

void ProjectorConfig::validate() const {
  if (feature_dim < 1 || model_dim < 1) {
    throw ConfigError("projector: widths must be >= 1");
  }
  if (kind == ProjectorKind::GrKan) {
    if (grkan_groups < 1 || feature_dim % grkan_groups != 0) {
      throw ConfigError("projector: grkan_groups must divide feature_dim");
    }
    if (grkan_num_order < 1 || grkan_den_order < 1) {
      throw ConfigError("projector: grkan orders must be >= 1");
    }
    if (grkan_init != "silu" && grkan_init != "identity") {
      throw ConfigError("projector: grkan_init must be silu or identity");
    }
  }
  if (kind == ProjectorKind::Kan) {
    if (!(kan_t_min < kan_t_max) || kan_intervals < 1 || kan_order < 0) {
      throw ConfigError("projector: invalid kan grid");
    }
  }
}

void ConformerConfig::validate() const {
  if (blocks < 1) throw ConfigError("encoder: blocks must be >= 1");
  if (model_dim < 1 || heads < 1 || model_dim % heads != 0) {
    throw ConfigError("encoder: model_dim must be a positive multiple of heads");
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ConfigError("encoder: conv_kernel must be odd and >= 1");
  }
  if (ffn_expansion < 1) throw ConfigError("encoder: ffn_expansion must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("encoder: dropout must lie in [0, 1)");
  }
}

void ModelConfig::validate() const {
  projector.validate();
  encoder.validate();
  if (projector.model_dim != encoder.model_dim) {
    throw ConfigError("model: projector and encoder widths differ");
  }
}

std::string ModelConfig::canonical_text() const {
  std::ostringstream os;
  char buf[64];
  auto put_d = [&](const char* key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << key << " = " << buf << "\n";
  };
  os << "blocks = " << encoder.blocks << "\n";
  os << "conv_kernel = " << encoder.conv_kernel << "\n";
  put_d("dropout", encoder.dropout);
  os << "feature_dim = " << projector.feature_dim << "\n";
  os << "ffn_expansion = " << encoder.ffn_expansion << "\n";
  os << "grkan_den_order = " << projector.grkan_den_order << "\n";
  os << "grkan_groups = " << projector.grkan_groups << "\n";
  os << "grkan_init = " << projector.grkan_init << "\n";
  os << "grkan_num_order = " << projector.grkan_num_order << "\n";
  os << "heads = " << encoder.heads << "\n";
  os << "kan_intervals = " << projector.kan_intervals << "\n";
  os << "kan_order = " << projector.kan_order << "\n";
  put_d("kan_t_max", projector.kan_t_max);
  put_d("kan_t_min", projector.kan_t_min);
  os << "model_dim = " << encoder.model_dim << "\n";
  os << "posenc = " << (encoder.positional_encoding ? "true" : "false")
     << "\n";
  os << "projector = " << projector_kind_name(projector.kind) << "\n";
  return os.str();
}

ModelConfig ModelConfig::from_config(const ConfigMap& cfg) {
  ModelConfig m;
  m.projector.kind =
      projector_kind_from_name(cfg.get_string("projector", "mlp"));
  m.projector.feature_dim =
      static_cast<int>(cfg.get_int("feature_dim", m.projector.feature_dim));
  m.projector.model_dim =
      static_cast<int>(cfg.get_int("model_dim", m.projector.model_dim));
  m.projector.grkan_groups =
      static_cast<int>(cfg.get_int("grkan_groups", m.projector.grkan_groups));
  m.projector.grkan_num_order = static_cast<int>(
      cfg.get_int("grkan_num_order", m.projector.grkan_num_order));
  m.projector.grkan_den_order = static_cast<int>(
      cfg.get_int("grkan_den_order", m.projector.grkan_den_order));
  m.projector.grkan_init = cfg.get_string("grkan_init", m.projector.grkan_init);
  m.projector.kan_t_min = cfg.get_double("kan_t_min", m.projector.kan_t_min);
  m.projector.kan_t_max = cfg.get_double("kan_t_max", m.projector.kan_t_max);
  m.projector.kan_intervals = static_cast<int>(
      cfg.get_int("kan_intervals", m.projector.kan_intervals));
  m.projector.kan_order =
      static_cast<int>(cfg.get_int("kan_order", m.projector.kan_order));
  m.encoder.blocks = static_cast<int>(cfg.get_int("blocks", m.encoder.blocks));
  m.encoder.model_dim = m.projector.model_dim;
  m.encoder.heads = static_cast<int>(cfg.get_int("heads", m.encoder.heads));
  m.encoder.conv_kernel =
      static_cast<int>(cfg.get_int("conv_kernel", m.encoder.conv_kernel));
  m.encoder.ffn_expansion =
      static_cast<int>(cfg.get_int("ffn_expansion", m.encoder.ffn_expansion));
  m.encoder.dropout = cfg.get_double("dropout", m.encoder.dropout);
  m.encoder.positional_encoding =
      cfg.get_bool("posenc", m.encoder.positional_encoding);
  m.validate();
  return m;
}

// ---- ConformerBlock ----------------------------------------------------

namespace {

Tensor linear_init(int fan_in, int fan_out, Rng& rng) {
  return Tensor::randn({fan_in, fan_out}, rng,
                       1.0 / std::sqrt(static_cast<double>(fan_in)), true);
}

Tensor zeros_param(Shape shape) { return Tensor::zeros(std::move(shape), true); }

Tensor ones_param(Shape shape) {
  Tensor t = Tensor::full(std::move(shape), 1.0);
  t.set_requires_grad(true);
  return t;
}

Tensor maybe_dropout(const Tensor& x, double rate,
                     const ConformerBlock::Ctx& ctx) {
  if (!ctx.training || rate <= 0.0) return x;
  if (ctx.rng == nullptr) {
    throw ContractError("dropout in training mode requires an RNG");
  }
  return dropout(x, rate, *ctx.rng);
}

}  // namespace

ConformerBlock::ConformerBlock(const ConformerConfig& cfg, Rng& rng)
    : model_dim(cfg.model_dim),
      heads(cfg.heads),
      conv_kernel(cfg.conv_kernel),
      dropout_rate(cfg.dropout) {
  const int d = cfg.model_dim;
  const int e = cfg.ffn_expansion * d;
  ffn1_ln_g = ones_param({d});
  ffn1_ln_b = zeros_param({d});
  ffn1_w1 = linear_init(d, e, rng);
  ffn1_b1 = zeros_param({e});
  ffn1_w2 = linear_init(e, d, rng);
  ffn1_b2 = zeros_param({d});
  mhsa_ln_g = ones_param({d});
  mhsa_ln_b = zeros_param({d});
  wq = linear_init(d, d, rng);
  bq = zeros_param({d});
  wk = linear_init(d, d, rng);
  wv = linear_init(d, d, rng);
  bv = zeros_param({d});
  wo = linear_init(d, d, rng);
  bo = zeros_param({d});
  conv_ln_g = ones_param({d});
  conv_ln_b = zeros_param({d});
  conv_pw1_w = linear_init(d, 2 * d, rng);
  conv_pw1_b = zeros_param({2 * d});
  conv_dw_w = Tensor::randn({cfg.conv_kernel, d}, rng,
                            1.0 / std::sqrt(static_cast<double>(cfg.conv_kernel)),
                            true);
  conv_dw_b = zeros_param({d});
  conv_norm_g = ones_param({d});
  conv_norm_b = zeros_param({d});
  conv_pw2_w = linear_init(d, d, rng);
  conv_pw2_b = zeros_param({d});
  ffn2_ln_g = ones_param({d});
  ffn2_ln_b = zeros_param({d});
  ffn2_w1 = linear_init(d, e, rng);
  ffn2_b1 = zeros_param({e});
  ffn2_w2 = linear_init(e, d, rng);
  ffn2_b2 = zeros_param({d});
  final_ln_g = ones_param({d});
  final_ln_b = zeros_param({d});
}

Tensor ConformerBlock::mhsa(const Tensor& x, int64_t batch, int64_t seq,
                            const Ctx& ctx) const {
  const int64_t d = model_dim;
  const int64_t dh = d / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor q = add_bias(matmul(x, wq), bq);
  // no key bias: softmax attention is invariant to a per-query constant
  // shift, so a key bias is untrainable dead weight
  Tensor k = matmul(x, wk);
  Tensor v = add_bias(matmul(x, wv), bv);
  std::vector<Tensor> per_trial;
  per_trial.reserve(batch);
  for (int64_t b = 0; b < batch; ++b) {
    Tensor qb = slice_rows(q, b * seq, (b + 1) * seq);
    Tensor kb = slice_rows(k, b * seq, (b + 1) * seq);
    Tensor vb = slice_rows(v, b * seq, (b + 1) * seq);
    std::vector<Tensor> head_out;
    head_out.reserve(heads);
    for (int h = 0; h < heads; ++h) {
      Tensor qh = slice_cols(qb, h * dh, (h + 1) * dh);
      Tensor kh = slice_cols(kb, h * dh, (h + 1) * dh);
      Tensor vh = slice_cols(vb, h * dh, (h + 1) * dh);
      Tensor scores = scale(matmul_nt(qh, kh), scale_factor);
      Tensor probs = row_softmax(scores);
      head_out.push_back(matmul(probs, vh));
    }
    per_trial.push_back(concat_cols(head_out));
  }
  Tensor ctx_all = batch == 1 ? per_trial[0] : concat_rows(per_trial);
  Tensor out = add_bias(matmul(ctx_all, wo), bo);
  return maybe_dropout(out, dropout_rate, ctx);
}

Tensor ConformerBlock::forward(const Tensor& x, int64_t batch, int64_t seq,
                               const Ctx& ctx) const {
  if (x.rank() != 2 || x.cols() != model_dim) {
    throw DimensionError("conformer block: input " + shape_str(x.shape()) +
                         " does not match width " + std::to_string(model_dim));
  }
  if (batch * seq != x.rows()) {
    throw DimensionError("conformer block: batch*seq != rows of " +
                         shape_str(x.shape()));
  }
  auto ffn = [&](const Tensor& z, const Tensor& w1, const Tensor& b1,
                 const Tensor& w2, const Tensor& b2) {
    Tensor h = silu(add_bias(matmul(z, w1), b1));
    h = maybe_dropout(h, dropout_rate, ctx);
    h = add_bias(matmul(h, w2), b2);
    return maybe_dropout(h, dropout_rate, ctx);
  };

  Tensor h = x;
  // half-step feed-forward
  h = add_scaled(h, ffn(layer_norm(h, ffn1_ln_g, ffn1_ln_b), ffn1_w1, ffn1_b1,
                        ffn1_w2, ffn1_b2),
                 0.5);
  // self-attention
  h = add(h, mhsa(layer_norm(h, mhsa_ln_g, mhsa_ln_b), batch, seq, ctx));
  // convolution module: pointwise -> GLU -> depthwise -> norm -> SiLU ->
  // pointwise
  {
    Tensor z = layer_norm(h, conv_ln_g, conv_ln_b);
    z = add_bias(matmul(z, conv_pw1_w), conv_pw1_b);
    Tensor gate = sigmoid(slice_cols(z, model_dim, 2 * model_dim));
    z = mul(slice_cols(z, 0, model_dim), gate);
    z = add_bias(depthwise_conv1d(z, conv_dw_w, batch, seq), conv_dw_b);
    z = layer_norm(z, conv_norm_g, conv_norm_b);
    z = silu(z);
    z = add_bias(matmul(z, conv_pw2_w), conv_pw2_b);
    z = maybe_dropout(z, dropout_rate, ctx);
    h = add(h, z);
  }
  // second half-step feed-forward
  h = add_scaled(h, ffn(layer_norm(h, ffn2_ln_g, ffn2_ln_b), ffn2_w1, ffn2_b1,
                        ffn2_w2, ffn2_b2),
                 0.5);
  return layer_norm(h, final_ln_g, final_ln_b);
}

std::vector<std::pair<std::string, Tensor*>> ConformerBlock::named_parameters(
    const std::string& prefix) {
  return {
      {prefix + ".ffn1.ln.g", &ffn1_ln_g},   {prefix + ".ffn1.ln.b", &ffn1_ln_b},
      {prefix + ".ffn1.w1", &ffn1_w1},       {prefix + ".ffn1.b1", &ffn1_b1},
      {prefix + ".ffn1.w2", &ffn1_w2},       {prefix + ".ffn1.b2", &ffn1_b2},
      {prefix + ".mhsa.ln.g", &mhsa_ln_g},   {prefix + ".mhsa.ln.b", &mhsa_ln_b},
      {prefix + ".mhsa.wq", &wq},            {prefix + ".mhsa.bq", &bq},
      {prefix + ".mhsa.wk", &wk},
      {prefix + ".mhsa.wv", &wv},            {prefix + ".mhsa.bv", &bv},
      {prefix + ".mhsa.wo", &wo},            {prefix + ".mhsa.bo", &bo},
      {prefix + ".conv.ln.g", &conv_ln_g},   {prefix + ".conv.ln.b", &conv_ln_b},
      {prefix + ".conv.pw1.w", &conv_pw1_w}, {prefix + ".conv.pw1.b", &conv_pw1_b},
      {prefix + ".conv.dw.w", &conv_dw_w},   {prefix + ".conv.dw.b", &conv_dw_b},
      {prefix + ".conv.norm.g", &conv_norm_g},
      {prefix + ".conv.norm.b", &conv_norm_b},
      {prefix + ".conv.pw2.w", &conv_pw2_w}, {prefix + ".conv.pw2.b", &conv_pw2_b},
      {prefix + ".ffn2.ln.g", &ffn2_ln_g},   {prefix + ".ffn2.ln.b", &ffn2_ln_b},
      {prefix + ".ffn2.w1", &ffn2_w1},       {prefix + ".ffn2.b1", &ffn2_b1},
      {prefix + ".ffn2.w2", &ffn2_w2},       {prefix + ".ffn2.b2", &ffn2_b2},
      {prefix + ".final.ln.g", &final_ln_g}, {prefix + ".final.ln.b", &final_ln_b},
  };
}

// ---- SsdModel ------------------------------------------------------------

SsdModel::SsdModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const int d = cfg_.projector.feature_dim;
  const int dp = cfg_.projector.model_dim;
  Rng zero_rng(0);
  switch (cfg_.projector.kind) {
    case ProjectorKind::Mlp:
      mlp_w_ = Tensor::zeros({d, dp}, true);
      mlp_b_ = Tensor::zeros({dp}, true);
      break;
    case ProjectorKind::GrKan:
      grkan_ = std::make_unique<GrKanLayer>(
          d, dp, cfg_.projector.grkan_groups, true,
          cfg_.projector.grkan_num_order, cfg_.projector.grkan_den_order);
      break;
    case ProjectorKind::Kan:
      kan_ = std::make_unique<KanLayer>(
          d, dp,
          KnotGrid(cfg_.projector.kan_t_min, cfg_.projector.kan_t_max,
                   cfg_.projector.kan_intervals, cfg_.projector.kan_order));
      break;
  }
  cls_ = Tensor::zeros({1, dp}, true);
  blocks_.reserve(cfg_.encoder.blocks);
  for (int i = 0; i < cfg_.encoder.blocks; ++i) {
    blocks_.emplace_back(cfg_.encoder, zero_rng);
    for (auto& [name, t] : blocks_.back().named_parameters("")) {
      std::fill(t->mutable_data().begin(), t->mutable_data().end(), 0.0);
    }
  }
  head_w_ = Tensor::zeros({dp, 2}, true);
  head_b_ = Tensor::zeros({2}, true);
}

SsdModel SsdModel::init(ModelConfig cfg, uint64_t seed) {
  cfg.validate();
  SsdModel m(cfg);
  Rng rng(seed);
  const int d = cfg.projector.feature_dim;
  const int dp = cfg.projector.model_dim;
  switch (cfg.projector.kind) {
    case ProjectorKind::Mlp: {
      Rng prng = rng.fork(1);
      m.mlp_w_ = linear_init(d, dp, prng);
      break;
    }
    case ProjectorKind::GrKan: {
      RationalFn act;
      if (cfg.projector.grkan_init == "identity") {
        act = RationalFn::identity(cfg.projector.grkan_num_order,
                                   cfg.projector.grkan_den_order);
      } else {
        act = fit_rational_to_function(
                  [](double x) {
                    return x >= 0.0 ? x / (1.0 + std::exp(-x))
                                    : x * std::exp(x) / (1.0 + std::exp(x));
                  },
                  cfg.projector.grkan_num_order, cfg.projector.grkan_den_order,
                  -3.0, 3.0)
                  .fn;
      }
      m.grkan_ = std::make_unique<GrKanLayer>(GrKanLayer::variance_preserving_init(
          d, dp, cfg.projector.grkan_groups, act, rng.fork(1).seed(), true));
      break;
    }
    case ProjectorKind::Kan: {
      m.kan_ = std::make_unique<KanLayer>(KanLayer::init(
          d, dp,
          KnotGrid(cfg.projector.kan_t_min, cfg.projector.kan_t_max,
                   cfg.projector.kan_intervals, cfg.projector.kan_order),
          rng.fork(1).seed()));
      break;
    }
  }
  {
    Rng crng = rng.fork(2);
    m.cls_ = Tensor::randn({1, dp}, crng, 0.02, true);
  }
  m.blocks_.clear();
  for (int i = 0; i < cfg.encoder.blocks; ++i) {
    Rng brng = rng.fork(3 + i);
    m.blocks_.emplace_back(cfg.encoder, brng);
  }
  {
    Rng hrng = rng.fork(100);
    m.head_w_ = linear_init(dp, 2, hrng);
  }
  return m;
}

Tensor SsdModel::project(const Tensor& features) const {
  if (features.rank() != 2 || features.cols() != cfg_.projector.feature_dim) {
    throw DimensionError("project: features " + shape_str(features.shape()) +
                         " do not match feature width " +
                         std::to_string(cfg_.projector.feature_dim));
  }
  Tensor h;
  switch (cfg_.projector.kind) {
    case ProjectorKind::Mlp:
      h = add_bias(matmul(features, mlp_w_), mlp_b_);
      break;
    case ProjectorKind::GrKan:
      h = grkan_->forward(features);
      break;
    case ProjectorKind::Kan:
      h = kan_->forward(features);
      break;
  }
  return selu(h);
}

Tensor SsdModel::prepend_cls(const Tensor& x, int64_t batch,
                             int64_t frames) const {
  if (batch < 1) throw ContractError("prepend_cls: batch must be >= 1");
  if (frames == 0) {
    std::vector<Tensor> parts(batch, cls_);
    return batch == 1 ? concat_rows({cls_}) : concat_rows(parts);
  }
  if (x.rank() != 2 || x.rows() != batch * frames ||
      x.cols() != cls_.cols()) {
    throw DimensionError("prepend_cls: input " + shape_str(x.shape()) +
                         " does not match batch " + std::to_string(batch) +
                         " x frames " + std::to_string(frames));
  }
  std::vector<Tensor> parts;
  parts.reserve(2 * batch);
  for (int64_t b = 0; b < batch; ++b) {
    parts.push_back(cls_);
    parts.push_back(slice_rows(x, b * frames, (b + 1) * frames));
  }
  return concat_rows(parts);
}

Tensor SsdModel::encode(const Tensor& x, int64_t batch, int64_t seq,
                        const Ctx& ctx) const {
  Tensor h = x;
  for (const auto& block : blocks_) {
    h = block.forward(h, batch, seq, ctx);
  }
  return h;
}

Tensor SsdModel::classify(const Tensor& encoded, int64_t batch,
                          int64_t seq) const {
  std::vector<int64_t> cls_rows(batch);
  for (int64_t b = 0; b < batch; ++b) cls_rows[b] = b * seq + kClsIndex;
  Tensor pooled = take_rows(encoded, cls_rows);
  return add_bias(matmul(pooled, head_w_), head_b_);
}

namespace {

// Sinusoidal positions for the frame tokens, built per batch.
Tensor positional_table(int64_t batch, int64_t frames, int64_t dim) {
  std::vector<double> data(static_cast<size_t>(batch * frames) * dim);
  for (int64_t t = 0; t < frames; ++t) {
    for (int64_t j = 0; j < dim; ++j) {
      const double angle =
          static_cast<double>(t) /
          std::pow(10000.0, static_cast<double>(2 * (j / 2)) /
                                static_cast<double>(dim));
      const double v = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
      for (int64_t b = 0; b < batch; ++b) {
        data[static_cast<size_t>(b * frames + t) * dim + j] = v;
      }
    }
  }
  return Tensor::from_data({batch * frames, dim}, std::move(data));
}

}  // namespace

Tensor SsdModel::forward_logits(const Tensor& features, int64_t batch,
                                int64_t frames, const Ctx& ctx) const {
  if (frames < 1) throw ContractError("forward: frames must be >= 1");
  if (features.rank() != 2 || features.rows() != batch * frames) {
    throw DimensionError("forward: features " + shape_str(features.shape()) +
                         " do not match batch " + std::to_string(batch) +
                         " x frames " + std::to_string(frames));
  }
  Tensor h = project(features);
  if (cfg_.encoder.positional_encoding) {
    h = add(h, positional_table(batch, frames, cfg_.encoder.model_dim));
  }
  h = prepend_cls(h, batch, frames);
  const int64_t seq = frames + 1;
  h = encode(h, batch, seq, ctx);
  return classify(h, batch, seq);
}

std::vector<double> SsdModel::forward_scores(const Tensor& features,
                                             int64_t batch,
                                             int64_t frames) const {
  Tensor logits = forward_logits(features, batch, frames, Ctx{});
  std::vector<double> scores(batch);
  for (int64_t b = 0; b < batch; ++b) {
    scores[b] = score_from_logits(logits.at({b, kBonafideClass}),
                                  logits.at({b, kSpoofClass}));
  }
  return scores;
}

void SsdModel::load_grkan_projector_from_mlp(const Tensor& weight,
                                             const Tensor& bias, int groups) {
  if (weight.rank() != 2 || weight.rows() != cfg_.projector.feature_dim ||
      weight.cols() != cfg_.projector.model_dim) {
    throw DimensionError("load projector: weight " +
                         shape_str(weight.shape()) + " does not match " +
                         std::to_string(cfg_.projector.feature_dim) + " x " +
                         std::to_string(cfg_.projector.model_dim));
  }
  grkan_ = std::make_unique<GrKanLayer>(GrKanLayer::load_from_mlp(
      weight, bias, groups, cfg_.projector.grkan_num_order,
      cfg_.projector.grkan_den_order));
  cfg_.projector.kind = ProjectorKind::GrKan;
  cfg_.projector.grkan_groups = groups;
  mlp_w_ = Tensor();
  mlp_b_ = Tensor();
}

std::vector<std::pair<std::string, Tensor*>> SsdModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  switch (cfg_.projector.kind) {
    case ProjectorKind::Mlp:
      out.emplace_back("projector.w", &mlp_w_);
      out.emplace_back("projector.b", &mlp_b_);
      break;
    case ProjectorKind::GrKan:
      for (auto& p : grkan_->named_parameters("projector")) out.push_back(p);
      break;
    case ProjectorKind::Kan:
      for (auto& p : kan_->named_parameters("projector")) out.push_back(p);
      break;
  }
  out.emplace_back("cls", &cls_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    for (auto& p :
         blocks_[i].named_parameters("block" + std::to_string(i))) {
      out.push_back(p);
    }
  }
  out.emplace_back("head.w", &head_w_);
  out.emplace_back("head.b", &head_b_);
  return out;
}

std::vector<Tensor*> SsdModel::parameters() {
  std::vector<Tensor*> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

void SsdModel::zero_grad() {
  for (Tensor* t : parameters()) t->zero_grad();
}

}  // namespace ssdkan
