// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Group-rational KAN layers: the input channels are split into groups that
// share one safe rational activation each, followed by a per-edge scalar
// weight matrix. The layer is exactly activation-then-linear, so it can be
// initialized from a trained linear layer without changing its output.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssdkan/tensor.hpp"

namespace ssdkan {

// P(x) / (1 + |b1 x + ... + bn x^n|) with P(x) = a0 + a1 x + ... + am x^m.
// The denominator is >= 1 everywhere, so the function has no poles.
struct RationalFn {
  std::vector<double> num;  // a0..am
  std::vector<double> den;  // b1..bn, may be empty

  int num_order() const { return static_cast<int>(num.size()) - 1; }
  int den_order() const { return static_cast<int>(den.size()); }

  double operator()(double x) const;

  // a1 = 1, everything else zero; requires num_order >= 1.
  static RationalFn identity(int num_order, int den_order);
  static RationalFn zero(int num_order, int den_order);
};

double rational_eval(const RationalFn& fn, double x);

// Monte Carlo estimate of E[fn(z)^2] for z ~ N(0,1). The sample stream uses
// a fixed internal seed so the gain of a given activation is reproducible.
double estimate_gain(const RationalFn& fn, int64_t samples = 1'000'000);

struct RationalFit {
  RationalFn fn;
  double max_abs_error;  // measured on a 10x denser grid than the fit points
};

// Least-squares fit of the safe rational form to `target` on uniformly
// sampled points in [lo, hi]. Linearized solve followed by Gauss-Newton
// refinement of the true safe-form residual.
RationalFit fit_rational_to_function(const std::function<double(double)>& target,
                                     int num_order, int den_order, double lo,
                                     double hi, int samples = 2001);

class GrKanLayer {
 public:
  GrKanLayer(int input_dim, int output_dim, int groups, bool has_bias = true,
             int num_order = 5, int den_order = 4);

  // Shares `activation` across all groups and draws w ~ N(0, 1/(alpha * I))
  // where alpha = estimate_gain(activation). Throws InitError when alpha is
  // degenerate (< 1e-12).
  static GrKanLayer variance_preserving_init(int input_dim, int output_dim,
                                             int groups,
                                             const RationalFn& activation,
                                             uint64_t seed,
                                             bool has_bias = true);

  // w and bias are copied from the linear layer; every group's rational is
  // set to an identity fit so the loaded layer reproduces x*W + bias up to
  // the fit error. Pass an undefined bias tensor for a bias-free layer.
  static GrKanLayer load_from_mlp(const Tensor& weight, const Tensor& bias,
                                  int groups, int num_order = 5,
                                  int den_order = 4);

  // rows x I -> rows x O
  Tensor forward(const Tensor& x) const;
  // The grouped rational applied channelwise (rows x I), before the linear
  // map. forward(x) == matmul(activations(x), w) + bias, bitwise.
  Tensor activations(const Tensor& x) const;

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }
  int groups() const { return groups_; }
  int group_size() const { return input_dim_ / groups_; }
  int group_of(int channel) const { return channel / group_size(); }
  bool has_bias() const { return bias_.defined(); }
  int num_order() const { return num_order_; }
  int den_order() const { return den_order_; }

  // Gain recorded by variance_preserving_init, 0 otherwise.
  double init_gain() const { return init_gain_; }
  // Identity-fit error recorded by load_from_mlp, 0 otherwise.
  double load_fit_error() const { return load_fit_error_; }

  RationalFn group_rational(int g) const;
  void set_group_rational(int g, const RationalFn& fn);

  Tensor& numerator() { return num_; }      // groups x (num_order + 1)
  Tensor& denominator() { return den_; }    // groups x den_order
  Tensor& weight() { return weight_; }      // I x O
  Tensor& bias() { return bias_; }          // O, undefined when bias-free
  const Tensor& numerator() const { return num_; }
  const Tensor& denominator() const { return den_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

  std::vector<std::pair<std::string, Tensor*>> named_parameters(
      const std::string& prefix);

 private:
  int input_dim_;
  int output_dim_;
  int groups_;
  int num_order_;
  int den_order_;
  double init_gain_ = 0.0;
  double load_fit_error_ = 0.0;
  Tensor num_;
  Tensor den_;
  Tensor weight_;
  Tensor bias_;
};

}  // namespace ssdkan
