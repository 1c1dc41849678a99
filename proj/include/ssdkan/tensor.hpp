// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit float tensors with tape-based reverse-mode autodiff. Tensors
// are immutable once built except through mutable_data(), which owners use
// between optimizer steps. Ops record onto the active GradTape when one is in
// scope and some input requires gradients; without a tape the same calls are
// pure forward evaluation.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssdkan/errors.hpp"
#include "ssdkan/rng.hpp"

namespace ssdkan {

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& s);
int64_t shape_numel(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v);
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0,
                      bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int64_t dim(int i) const;
  int64_t numel() const;
  int64_t rows() const { return dim(0); }  // rank-2 helpers
  int64_t cols() const { return dim(1); }

  std::span<const double> data() const;
  // In-place mutation is reserved for parameter owners between steps; it does
  // not invalidate recorded tapes because tapes never outlive a step.
  std::span<double> mutable_data();
  double item() const;
  double at(std::initializer_list<int64_t> idx) const;

  bool requires_grad() const;
  void set_requires_grad(bool v);
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Deep copy of values (grad not copied). The copy is a fresh leaf.
  Tensor clone() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
  friend Tensor wrap_node(std::shared_ptr<detail::Node> n);
};

Tensor wrap_node(std::shared_ptr<detail::Node> n);

class GradTape {
 public:
  GradTape() = default;
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  // Runs reverse-mode accumulation from a scalar loss. Leaf gradients
  // accumulate across repeated calls; gradients of op outputs are reset at
  // the start of each call.
  void backward(const Tensor& loss);

  void record(std::shared_ptr<detail::Node> out, std::function<void()> fn);
  void clear();
  size_t size() const { return ops_.size(); }

  static GradTape* active();

  // RAII activation of a tape as the recording target.
  class Scope {
   public:
    explicit Scope(GradTape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradTape* prev_;
  };

 private:
  struct OpRecord {
    std::shared_ptr<detail::Node> out;
    std::function<void()> backward;
  };
  std::vector<OpRecord> ops_;
};

// ---- ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// a[m x k] * transpose(b[n x k]) -> m x n
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a + alpha * b
Tensor add_scaled(const Tensor& a, const Tensor& b, double alpha);
Tensor scale(const Tensor& a, double alpha);
Tensor add_scalar(const Tensor& a, double v);

Tensor silu(const Tensor& a);
Tensor selu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor abs(const Tensor& a);
// Elementwise x^p for scalar p. For non-integer p the domain is x > 0.
Tensor pow(const Tensor& a, double p);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// x[r x c] + bias[c] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor row_softmax(const Tensor& x);
// Normalizes each row of x over the feature axis.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor take_rows(const Tensor& x, const std::vector<int64_t>& rows);

// Inverted dropout. rate == 0 returns x unchanged.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

// x is (batch * seq) x channels; depthwise 1-D convolution along seq with
// zero padding, kernel[k x channels], k odd.
Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, int64_t batch,
                        int64_t seq);

// Mean cross entropy of logits[b x classes] against integer labels.
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

// SeLU constants (Klambauer et al. published values).
inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

// Support for fused ops defined outside this translation unit (layer
// forwards with hand-written backward rules).
namespace ops_detail {

bool recording(std::initializer_list<const Tensor*> inputs);
// Builds the output node, marks requires_grad, and records `backward` onto
// the active tape when `rec` is true. The backward rule receives the output
// node to read its accumulated gradient from.
Tensor make_op_output(Shape shape, std::vector<double> value, bool rec,
                      std::function<void(const detail::Node&)> backward);
void grad_accumulate(const std::shared_ptr<detail::Node>& n,
                     std::span<const double> g);

}  // namespace ops_detail

// ---- verification ----------------------------------------------------

// Max over coordinates of |analytic - central difference| normalized by
// max(|analytic|, |numeric|, 1e-8).
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double h = 1e-5);

// Same check against several parameter tensors at once; fn() must evaluate
// the scalar using the current parameter values.
double grad_check_params(const std::function<Tensor()>& fn,
                         const std::vector<Tensor>& params, double h = 1e-5);

}  // namespace ssdkan
