// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "ssdkan/gradcheck.hpp"
#include "ssdkan/model.hpp"

using namespace ssdkan;

namespace {

ModelConfig micro_config(ProjectorKind kind = ProjectorKind::Mlp) {
  ModelConfig cfg;
  cfg.projector.kind = kind;
  cfg.projector.feature_dim = 6;
  cfg.projector.model_dim = 8;
  cfg.projector.grkan_groups = 2;
  cfg.projector.grkan_num_order = 3;
  cfg.projector.grkan_den_order = 2;
  cfg.encoder.blocks = 1;
  cfg.encoder.model_dim = 8;
  cfg.encoder.heads = 2;
  cfg.encoder.conv_kernel = 3;
  cfg.encoder.ffn_expansion = 2;
  cfg.encoder.dropout = 0.0;
  return cfg;
}

double selu_ref(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(),
                     sizeof(double) * a.numel()) == 0;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig cfg = micro_config();
  cfg.encoder.heads = 3;  // does not divide 8
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = micro_config();
  cfg.encoder.conv_kernel = 4;  // even
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = micro_config();
  cfg.projector.kind = ProjectorKind::GrKan;
  cfg.projector.grkan_groups = 5;  // does not divide 6
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config canonical text round-trips through the parser") {
  ModelConfig cfg = micro_config(ProjectorKind::GrKan);
  const std::string text = cfg.canonical_text();
  ModelConfig back = ModelConfig::from_config(
      ConfigMap::from_string(text + "target_samples = 100\n"));
  CHECK(back.canonical_text() == text);
}

TEST_CASE("mlp projector with zero weights gives zero output") {
  SsdModel model(micro_config());
  Rng rng(1);
  Tensor x = Tensor::randn({5, 6}, rng);
  Tensor y = model.project(x);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("grkan projector with exact identity rationals and identity weights "
          "is SeLU") {
  ModelConfig cfg = micro_config(ProjectorKind::GrKan);
  cfg.projector.feature_dim = 8;  // square so W can be the identity
  SsdModel model(cfg);
  GrKanLayer* proj = model.grkan_projector();
  REQUIRE(proj != nullptr);
  for (int g = 0; g < proj->groups(); ++g) {
    proj->set_group_rational(g, RationalFn::identity(3, 2));
  }
  auto w = proj->weight().mutable_data();
  for (int i = 0; i < 8; ++i) w[i * 8 + i] = 1.0;
  Rng rng(2);
  Tensor x = Tensor::randn({4, 8}, rng);
  Tensor y = model.project(x);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK(y.data()[i] == selu_ref(x.data()[i]));
  }
}

TEST_CASE("mlp projector and grkan projector loaded from it agree") {
  ModelConfig cfg = micro_config();
  SsdModel mlp_model = SsdModel::init(cfg, 77);
  ModelConfig gcfg = micro_config(ProjectorKind::GrKan);
  SsdModel grkan_model = SsdModel::init(gcfg, 77);
  grkan_model.load_grkan_projector_from_mlp(mlp_model.mlp_weight(),
                                            mlp_model.mlp_bias(), 2);
  Rng rng(3);
  std::vector<double> xs(5 * 6);
  for (auto& v : xs) v = rng.uniform(-3.0, 3.0);
  Tensor x = Tensor::from_data({5, 6}, std::move(xs));
  Tensor a = mlp_model.project(x);
  Tensor b = grkan_model.project(x);
  double worst = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) {
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("swapping in a grkan projector loaded from the mlp keeps model "
          "scores within 1e-4") {
  // same seed -> identical token, blocks, and head across projector kinds;
  // only the projector differs, and loading transfers it
  SsdModel mlp_model = SsdModel::init(micro_config(ProjectorKind::Mlp), 321);
  SsdModel grkan_model =
      SsdModel::init(micro_config(ProjectorKind::GrKan), 321);
  grkan_model.load_grkan_projector_from_mlp(mlp_model.mlp_weight(),
                                            mlp_model.mlp_bias(), 2);
  Rng rng(19);
  const int64_t batch = 3;
  const int64_t frames = 6;
  std::vector<double> xs(static_cast<size_t>(batch * frames) * 6);
  for (auto& v : xs) v = rng.uniform(-3.0, 3.0);
  Tensor x = Tensor::from_data({batch * frames, 6}, std::move(xs));
  auto a = mlp_model.forward_scores(x, batch, frames);
  auto b = grkan_model.forward_scores(x, batch, frames);
  for (int64_t i = 0; i < batch; ++i) {
    CHECK(std::fabs(a[i] - b[i]) < 1e-4);
  }
}

TEST_CASE("prepend_cls places the token at row zero of every trial") {
  SsdModel model = SsdModel::init(micro_config(), 5);
  Rng rng(4);
  const int64_t batch = 3;
  const int64_t frames = 4;
  Tensor x = Tensor::randn({batch * frames, 8}, rng);
  Tensor y = model.prepend_cls(x, batch, frames);
  REQUIRE(y.rows() == batch * (frames + 1));
  const auto cls = model.cls_token().data();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t j = 0; j < 8; ++j) {
      CHECK(y.at({b * (frames + 1), j}) == cls[j]);
    }
    for (int64_t t = 0; t < frames; ++t) {
      for (int64_t j = 0; j < 8; ++j) {
        CHECK(y.at({b * (frames + 1) + t + 1, j}) ==
              x.at({b * frames + t, j}));
      }
    }
  }
}

TEST_CASE("prepend_cls with zero frames yields only the token rows") {
  SsdModel model = SsdModel::init(micro_config(), 6);
  Tensor y = model.prepend_cls(Tensor(), 3, 0);
  REQUIRE(y.rows() == 3);
  for (int64_t b = 0; b < 3; ++b) {
    for (int64_t j = 0; j < 8; ++j) {
      CHECK(y.at({b, j}) == model.cls_token().data()[j]);
    }
  }
}

TEST_CASE("classification token receives gradient") {
  SsdModel model = SsdModel::init(micro_config(), 7);
  Rng rng(5);
  Tensor x = Tensor::randn({2 * 3, 6}, rng);
  GradTape tape;
  {
    GradTape::Scope scope(tape);
    Tensor logits = model.forward_logits(x, 2, 3);
    Tensor loss = softmax_cross_entropy(logits, {0, 1});
    tape.backward(loss);
  }
  REQUIRE(model.cls_token().has_grad());
  double norm = 0.0;
  for (double g : model.cls_token().grad()) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("conformer block preserves shape for several sequence lengths") {
  ConformerConfig cfg = micro_config().encoder;
  Rng rng(6);
  ConformerBlock block(cfg, rng);
  for (int64_t seq : {1, 5, 64}) {
    Tensor x = Tensor::randn({seq, 8}, rng);
    Tensor y = block.forward(x, 1, seq, {});
    CHECK(y.shape() == x.shape());
  }
}

TEST_CASE("conformer block forward is deterministic with dropout off") {
  ConformerConfig cfg = micro_config().encoder;
  Rng rng(7);
  ConformerBlock block(cfg, rng);
  Tensor x = Tensor::randn({10, 8}, rng);
  Tensor a = block.forward(x, 2, 5, {});
  Tensor b = block.forward(x, 2, 5, {});
  CHECK(bitwise_equal(a, b));
}

TEST_CASE("tiny conformer block passes a finite-difference gradient check") {
  ConformerConfig cfg = micro_config().encoder;
  Rng rng(8);
  ConformerBlock block(cfg, rng);
  Tensor x0 = Tensor::randn({3, 8}, rng);  // batch 1, seq 3
  // a random linear functional of the output; a plain sum is constant here
  // because the final layer norm makes every row sum to zero at gamma = 1
  Tensor w = Tensor::randn({3, 8}, rng);
  const double err = grad_check(
      [&](const Tensor& x) { return sum(mul(block.forward(x, 1, 3, {}), w)); },
      x0, 1e-4);
  CHECK(err < 1e-4);
}

TEST_CASE("single-token attention is the value path") {
  ConformerConfig cfg = micro_config().encoder;
  Rng rng(9);
  ConformerBlock block(cfg, rng);
  Tensor x = Tensor::randn({1, 8}, rng);
  Tensor got = block.mhsa(x, 1, 1, {});
  // with one token the softmax weight is 1, so the output is Wo(Wv x + bv)+bo
  Tensor v = add_bias(matmul(x, block.wv), block.bv);
  Tensor expect = add_bias(matmul(v, block.wo), block.bo);
  double worst = 0.0;
  for (int64_t i = 0; i < got.numel(); ++i) {
    worst = std::max(worst, std::fabs(got.data()[i] - expect.data()[i]));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("attention matches an explicit loop oracle") {
  ConformerConfig cfg = micro_config().encoder;
  cfg.model_dim = 4;
  cfg.heads = 1;
  Rng rng(10);
  ConformerBlock block(cfg, rng);
  const int64_t seq = 3;
  Tensor x = Tensor::randn({seq, 4}, rng);
  Tensor got = block.mhsa(x, 1, seq, {});

  // oracle: dense loops over queries, keys, values
  auto lin = [&](const Tensor& w, const Tensor* b, int64_t r, int64_t c) {
    double acc = b != nullptr ? b->data()[c] : 0.0;
    for (int64_t i = 0; i < 4; ++i) acc += x.at({r, i}) * w.at({i, c});
    return acc;
  };
  std::vector<std::vector<double>> q(seq, std::vector<double>(4));
  auto k = q;
  auto v = q;
  for (int64_t r = 0; r < seq; ++r) {
    for (int64_t c = 0; c < 4; ++c) {
      q[r][c] = lin(block.wq, &block.bq, r, c);
      k[r][c] = lin(block.wk, nullptr, r, c);
      v[r][c] = lin(block.wv, &block.bv, r, c);
    }
  }
  for (int64_t i = 0; i < seq; ++i) {
    std::vector<double> logits(seq);
    for (int64_t j = 0; j < seq; ++j) {
      double dot = 0.0;
      for (int64_t c = 0; c < 4; ++c) dot += q[i][c] * k[j][c];
      logits[j] = dot / 2.0;  // sqrt(d_head) = 2
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    std::vector<double> p(seq);
    for (int64_t j = 0; j < seq; ++j) {
      p[j] = std::exp(logits[j] - mx);
      denom += p[j];
    }
    for (auto& pv : p) pv /= denom;
    CHECK(std::fabs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) < 1e-12);
    for (int64_t c = 0; c < 4; ++c) {
      double ctx = 0.0;
      for (int64_t j = 0; j < seq; ++j) ctx += p[j] * v[j][c];
      // context then output projection
      double out = block.bo.data()[c];
      for (int64_t cc = 0; cc < 4; ++cc) {
        double ctx_cc = 0.0;
        for (int64_t j = 0; j < seq; ++j) ctx_cc += p[j] * v[j][cc];
        out += ctx_cc * block.wo.at({cc, c});
      }
      (void)ctx;
      CHECK(std::fabs(got.at({i, c}) - out) < 1e-12);
    }
  }
}

TEST_CASE("classify reads only the token row") {
  SsdModel model = SsdModel::init(micro_config(), 11);
  Rng rng(11);
  const int64_t batch = 2;
  const int64_t seq = 4;
  Tensor enc = Tensor::randn({batch * seq, 8}, rng);
  Tensor logits = model.classify(enc, batch, seq);
  REQUIRE(logits.rows() == batch);
  REQUIRE(logits.cols() == 2);
  // perturb every non-token row; logits must not move
  Tensor enc2 = enc.clone();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t t = 1; t < seq; ++t) {
      for (int64_t j = 0; j < 8; ++j) {
        enc2.mutable_data()[(b * seq + t) * 8 + j] += 13.37;
      }
    }
  }
  CHECK(bitwise_equal(logits, model.classify(enc2, batch, seq)));

  // zero head weights leave only the bias
  SsdModel zero_model(micro_config());
  Tensor bias_logits = zero_model.classify(enc, batch, seq);
  for (int64_t b = 0; b < batch; ++b) {
    CHECK(bias_logits.at({b, 0}) == 0.0);
    CHECK(bias_logits.at({b, 1}) == 0.0);
  }

  // softmax of logits normalizes
  Tensor probs = row_softmax(logits);
  for (int64_t b = 0; b < batch; ++b) {
    CHECK(probs.at({b, 0}) + probs.at({b, 1}) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("minimal forward returns a finite score") {
  SsdModel model = SsdModel::init(micro_config(), 12);
  Rng rng(12);
  Tensor x = Tensor::randn({1, 6}, rng);
  auto scores = model.forward_scores(x, 1, 1);
  REQUIRE(scores.size() == 1);
  CHECK(std::isfinite(scores[0]));
}

TEST_CASE("batch permutation permutes scores identically") {
  SsdModel model = SsdModel::init(micro_config(), 13);
  Rng rng(13);
  const int64_t batch = 4;
  const int64_t frames = 5;
  Tensor x = Tensor::randn({batch * frames, 6}, rng);
  auto scores = model.forward_scores(x, batch, frames);

  // reverse the trials
  std::vector<double> rev(x.numel());
  const size_t stride = frames * 6;
  for (int64_t b = 0; b < batch; ++b) {
    std::copy_n(x.data().data() + b * stride, stride,
                rev.data() + (batch - 1 - b) * stride);
  }
  auto rev_scores =
      model.forward_scores(Tensor::from_data({batch * frames, 6}, rev),
                           batch, frames);
  for (int64_t b = 0; b < batch; ++b) {
    CHECK(scores[b] == rev_scores[batch - 1 - b]);
  }
}

TEST_CASE("score of one trial does not depend on its batch companions") {
  SsdModel model = SsdModel::init(micro_config(), 14);
  Rng rng(14);
  const int64_t frames = 5;
  Tensor x = Tensor::randn({3 * frames, 6}, rng);
  auto batch_scores = model.forward_scores(x, 3, frames);
  for (int64_t b = 0; b < 3; ++b) {
    Tensor solo = slice_rows(x, b * frames, (b + 1) * frames);
    auto s = model.forward_scores(solo, 1, frames);
    CHECK(s[0] == batch_scores[b]);
  }
}

TEST_CASE("after one backward every parameter group has gradient") {
  for (ProjectorKind kind :
       {ProjectorKind::Mlp, ProjectorKind::GrKan, ProjectorKind::Kan}) {
    SsdModel model = SsdModel::init(micro_config(kind), 15);
    Rng rng(15);
    Tensor x = Tensor::randn({2 * 4, 6}, rng);
    GradTape tape;
    {
      GradTape::Scope scope(tape);
      Tensor logits = model.forward_logits(x, 2, 4);
      tape.backward(softmax_cross_entropy(logits, {0, 1}));
    }
    for (auto& [name, param] : model.named_parameters()) {
      REQUIRE(param->has_grad());
      double norm = 0.0;
      for (double g : param->grad()) norm += g * g;
      INFO(projector_kind_name(kind), " / ", name);
      CHECK(norm > 0.0);
    }
  }
}

TEST_CASE("dropout training forward is reproducible given the rng seed") {
  ModelConfig cfg = micro_config();
  cfg.encoder.dropout = 0.2;
  SsdModel model = SsdModel::init(cfg, 16);
  Rng rng(16);
  Tensor x = Tensor::randn({2 * 4, 6}, rng);
  Rng d1(999);
  Rng d2(999);
  Tensor a = model.forward_logits(x, 2, 4, {true, &d1});
  Tensor b = model.forward_logits(x, 2, 4, {true, &d2});
  CHECK(bitwise_equal(a, b));
  // and differs from the eval path
  Tensor c = model.forward_logits(x, 2, 4, {});
  CHECK(!bitwise_equal(a, c));
}

TEST_CASE("variable sequence lengths evaluate without retraining") {
  SsdModel model = SsdModel::init(micro_config(), 17);
  Rng rng(17);
  for (int64_t frames : {1, 3, 9, 17}) {
    Tensor x = Tensor::randn({frames, 6}, rng);
    auto s = model.forward_scores(x, 1, frames);
    REQUIRE(s.size() == 1);
    CHECK(std::isfinite(s[0]));
  }
}

TEST_CASE("positional encoding toggle changes outputs but keeps shape") {
  ModelConfig cfg = micro_config();
  SsdModel plain = SsdModel::init(cfg, 18);
  cfg.encoder.positional_encoding = true;
  SsdModel posenc = SsdModel::init(cfg, 18);
  Rng rng(18);
  Tensor x = Tensor::randn({6, 6}, rng);
  auto a = plain.forward_scores(x, 1, 6);
  auto b = posenc.forward_scores(x, 1, 6);
  CHECK(std::isfinite(b[0]));
  CHECK(a[0] != b[0]);
}

TEST_CASE("full micro model passes the gradient battery") {
  auto items = gradcheck_battery("model", 10);
  for (const auto& item : items) {
    INFO(item.name, " err=", item.max_rel_error);
    CHECK(item.pass);
  }
}
