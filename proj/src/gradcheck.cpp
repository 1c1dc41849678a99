// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/gradcheck.hpp"

#include <cmath>

#include "ssdkan/grkan.hpp"
#include "ssdkan/kan.hpp"
#include "ssdkan/model.hpp"
#include "ssdkan/tensor.hpp"

namespace ssdkan {

namespace {

// Stratified per column over the grid interior so every basis function sees
// samples well inside its support. Spline coefficients whose support is
// barely grazed have gradients near the round-off floor of a central
// difference, which would make the check measure noise instead of math.
Tensor kan_input_stratified(Rng& rng, int rows, int cols) {
  const double lo = -2.9;
  const double hi = 2.9;
  std::vector<double> data(static_cast<size_t>(rows) * cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) {
      const double u = (r + rng.uniform()) / rows;
      data[static_cast<size_t>(r) * cols + c] = lo + (hi - lo) * u;
    }
  }
  return Tensor::from_data({rows, cols}, std::move(data));
}

GradCheckItem check_kan(Rng& rng, int round) {
  KanLayer layer =
      KanLayer::init(4, 4, KnotGrid(-3.0, 3.0, 5, 3), rng.next_u64());
  Tensor x = kan_input_stratified(rng, 8, 4);
  x.set_requires_grad(true);
  auto fn = [&]() { return sum(layer.forward(x)); };
  const double err = grad_check_params(
      fn, {x, layer.coef(), layer.basis_weight(), layer.spline_weight()});
  GradCheckItem item;
  item.name = "kan layer #" + std::to_string(round);
  item.max_rel_error = err;
  item.threshold = 1e-5;
  item.pass = err < item.threshold;
  return item;
}

GradCheckItem check_grkan(Rng& rng, int round) {
  const int groups[] = {1, 2, 4, 8};
  const int k = groups[round % 4];
  GrKanLayer layer(8, 5, k);
  for (auto& v : layer.numerator().mutable_data()) v = rng.normal() * 0.5;
  for (auto& v : layer.denominator().mutable_data()) v = rng.normal() * 0.3;
  for (auto& v : layer.weight().mutable_data()) v = rng.normal() * 0.5;
  for (auto& v : layer.bias().mutable_data()) v = rng.normal() * 0.1;

  // keep every element away from the |.| kink of the safe denominator
  std::vector<double> data(static_cast<size_t>(3) * 8);
  for (size_t i = 0; i < data.size(); ++i) {
    const int channel = static_cast<int>(i % 8);
    const RationalFn fn = layer.group_rational(layer.group_of(channel));
    for (int tries = 0; tries < 200; ++tries) {
      const double x = rng.uniform(-2.5, 2.5);
      double s = 0.0;
      if (!fn.den.empty()) {
        s = fn.den.back();
        for (int j = static_cast<int>(fn.den.size()) - 2; j >= 0; --j) {
          s = s * x + fn.den[j];
        }
        s *= x;
      }
      if (std::fabs(s) > 1e-3) {
        data[i] = x;
        break;
      }
    }
  }
  Tensor x = Tensor::from_data({3, 8}, std::move(data));
  x.set_requires_grad(true);
  auto fn = [&]() { return sum(layer.forward(x)); };
  const double err = grad_check_params(
      fn, {x, layer.numerator(), layer.denominator(), layer.weight(),
           layer.bias()});
  GradCheckItem item;
  item.name = "grkan layer #" + std::to_string(round) + " (groups " +
              std::to_string(k) + ")";
  item.max_rel_error = err;
  item.threshold = 1e-5;
  item.pass = err < item.threshold;
  return item;
}

GradCheckItem check_model(Rng& rng, int round) {
  ModelConfig cfg;
  const ProjectorKind kinds[] = {ProjectorKind::Mlp, ProjectorKind::GrKan,
                                 ProjectorKind::Kan};
  cfg.projector.kind = kinds[round % 3];
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
  SsdModel model = SsdModel::init(cfg, rng.next_u64());

  const int64_t batch = 2;
  const int64_t frames = 3;
  // stratified for the same reason as the kan battery: a kan projector's
  // coefficient gradients drop into round-off territory when a basis support
  // is only grazed
  Tensor x = kan_input_stratified(rng, static_cast<int>(batch * frames), 6);
  x.set_requires_grad(true);
  std::vector<int> labels = {static_cast<int>(rng.uniform_int(2)),
                             static_cast<int>(rng.uniform_int(2))};
  auto fn = [&]() {
    Tensor logits = model.forward_logits(x, batch, frames);
    return softmax_cross_entropy(logits, labels);
  };
  std::vector<Tensor> params = {x};
  for (Tensor* p : model.parameters()) params.push_back(*p);
  const double err = grad_check_params(fn, params);
  GradCheckItem item;
  item.name = "ssd model #" + std::to_string(round) + " (" +
              projector_kind_name(cfg.projector.kind) + " projector)";
  item.max_rel_error = err;
  item.threshold = 1e-4;
  item.pass = err < item.threshold;
  return item;
}

}  // namespace

std::vector<GradCheckItem> gradcheck_battery(const std::string& module,
                                             int rounds, uint64_t seed) {
  if (module != "all" && module != "kan" && module != "grkan" &&
      module != "model") {
    throw ContractError("gradcheck: unknown module '" + module +
                        "' (expected all, kan, grkan, or model)");
  }
  Rng rng(seed);
  std::vector<GradCheckItem> items;
  if (module == "all" || module == "kan") {
    Rng r = rng.fork(1);
    for (int i = 0; i < rounds; ++i) items.push_back(check_kan(r, i));
  }
  if (module == "all" || module == "grkan") {
    Rng r = rng.fork(2);
    for (int i = 0; i < rounds; ++i) items.push_back(check_grkan(r, i));
  }
  if (module == "all" || module == "model") {
    Rng r = rng.fork(3);
    for (int i = 0; i < rounds; ++i) items.push_back(check_model(r, i));
  }
  return items;
}

}  // namespace ssdkan
