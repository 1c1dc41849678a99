// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ssdkan/kernels.hpp"

namespace ssdkan {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

namespace {

thread_local GradTape* g_active = nullptr;

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> data,
                                        bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

void check_positive_dims(const Shape& s) {
  for (int64_t d : s) {
    if (d <= 0) {
      throw DimensionError("tensor: non-positive dimension in " +
                           shape_str(s));
    }
  }
}

void accumulate(const std::shared_ptr<detail::Node>& n,
                std::span<const double> g) {
  if (!n->requires_grad) return;
  n->ensure_grad();
  kernels::add(n->grad.data(), g.data(), n->grad.data(),
               static_cast<int>(g.size()));
}

bool want_record(std::initializer_list<const Tensor*> inputs) {
  if (g_active == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void check_rank2(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 tensor, got " +
                         shape_str(t.shape()));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Tensor ----------------------------------------------------------

Tensor wrap_node(std::shared_ptr<detail::Node> n) {
  return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_positive_dims(shape);
  int64_t n = shape_numel(shape);
  return wrap_node(make_node(std::move(shape), std::vector<double>(n, 0.0),
                             requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  check_positive_dims(shape);
  int64_t n = shape_numel(shape);
  return wrap_node(
      make_node(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  check_positive_dims(shape);
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw DimensionError("tensor: data length " +
                         std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
  }
  return wrap_node(make_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double v) {
  return from_data({1}, {v});
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev, bool requires_grad) {
  check_positive_dims(shape);
  int64_t n = shape_numel(shape);
  std::vector<double> data(n);
  for (auto& v : data) v = rng.normal() * stddev;
  return wrap_node(make_node(std::move(shape), std::move(data), requires_grad));
}

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("tensor: undefined");
  return node_->shape;
}

int64_t Tensor::dim(int i) const {
  const Shape& s = shape();
  if (i < 0 || i >= static_cast<int>(s.size())) {
    throw DimensionError("tensor: dim index " + std::to_string(i) +
                         " out of range for " + shape_str(s));
  }
  return s[i];
}

int64_t Tensor::numel() const {
  return static_cast<int64_t>(node_ ? node_->value.size() : 0);
}

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("tensor: undefined");
  return node_->value;
}

std::span<double> Tensor::mutable_data() {
  if (!node_) throw ContractError("tensor: undefined");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ContractError("tensor: item() on non-scalar " + shape_str(shape()));
  }
  return node_->value[0];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
  const Shape& s = shape();
  if (idx.size() != s.size()) {
    throw DimensionError("tensor: index rank mismatch for " + shape_str(s));
  }
  int64_t flat = 0;
  int i = 0;
  for (int64_t v : idx) {
    if (v < 0 || v >= s[i]) {
      throw DimensionError("tensor: index out of range for " + shape_str(s));
    }
    flat = flat * s[i] + v;
    ++i;
  }
  return node_->value[flat];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool v) {
  if (!node_) throw ContractError("tensor: undefined");
  node_->requires_grad = v;
}

bool Tensor::has_grad() const {
  return node_ && node_->grad.size() == node_->value.size();
}

std::span<const double> Tensor::grad() const {
  if (!has_grad()) {
    throw ContractError("tensor: no gradient present");
  }
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  if (!node_) return Tensor();
  return from_data(node_->shape, node_->value, node_->requires_grad);
}

// ---- GradTape --------------------------------------------------------

GradTape::~GradTape() {
  if (g_active == this) g_active = nullptr;
}

GradTape* GradTape::active() { return g_active; }

GradTape::Scope::Scope(GradTape& tape) : prev_(g_active) { g_active = &tape; }

GradTape::Scope::~Scope() { g_active = prev_; }

void GradTape::record(std::shared_ptr<detail::Node> out,
                      std::function<void()> fn) {
  ops_.push_back({std::move(out), std::move(fn)});
}

void GradTape::clear() { ops_.clear(); }

void GradTape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(loss.shape()));
  }
  // Reset gradients of op outputs so repeated calls re-propagate from a clean
  // interior state; leaf gradients are left to accumulate.
  for (auto& op : ops_) {
    op.out->ensure_grad();
    std::fill(op.out->grad.begin(), op.out->grad.end(), 0.0);
  }
  auto& ln = *loss.node();
  ln.ensure_grad();
  ln.grad[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    it->backward();
  }
}

// ---- op helpers ------------------------------------------------------

namespace {

using NodePtr = std::shared_ptr<detail::Node>;

Tensor finish(NodePtr out, bool rec, std::function<void()> fn) {
  out->requires_grad = rec;
  if (rec) g_active->record(out, std::move(fn));
  return wrap_node(std::move(out));
}

// dst.grad += a * b with a temp product buffer
void matmul_into_grad(const NodePtr& dst, const double* a, const double* b,
                      int m, int k, int n) {
  if (!dst->requires_grad) return;
  std::vector<double> tmp(static_cast<size_t>(m) * n);
  kernels::matmul(a, b, tmp.data(), m, k, n);
  dst->ensure_grad();
  kernels::add(dst->grad.data(), tmp.data(), dst->grad.data(),
               static_cast<int>(tmp.size()));
}

Tensor unary_op(const Tensor& x, const std::function<double(double)>& f,
                const std::function<double(double, double)>& dfdx_from_xy) {
  auto in = x.node();
  std::vector<double> out(in->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = f(in->value[i]);
  NodePtr o = make_node(in->shape, std::move(out), false);
  bool rec = want_record({&x});
  return finish(o, rec, [in, o, dfdx_from_xy]() {
    if (!in->requires_grad) return;
    in->ensure_grad();
    for (size_t i = 0; i < o->grad.size(); ++i) {
      in->grad[i] += o->grad[i] * dfdx_from_xy(in->value[i], o->value[i]);
    }
  });
}

}  // namespace

// ---- arithmetic ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_rank2("matmul", a);
  check_rank2("matmul", b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions differ: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int m = static_cast<int>(a.rows());
  const int k = static_cast<int>(a.cols());
  const int n = static_cast<int>(b.cols());
  auto an = a.node();
  auto bn = b.node();
  std::vector<double> out(static_cast<size_t>(m) * n);
  kernels::matmul(an->value.data(), bn->value.data(), out.data(), m, k, n);
  NodePtr o = make_node({m, n}, std::move(out), false);
  bool rec = want_record({&a, &b});
  return finish(o, rec, [an, bn, o, m, k, n]() {
    // dA = dC * B^T, dB = A^T * dC
    if (an->requires_grad) {
      std::vector<double> bt(static_cast<size_t>(k) * n);
      kernels::transpose(bn->value.data(), bt.data(), k, n);
      matmul_into_grad(an, o->grad.data(), bt.data(), m, n, k);
    }
    if (bn->requires_grad) {
      std::vector<double> at(static_cast<size_t>(m) * k);
      kernels::transpose(an->value.data(), at.data(), m, k);
      matmul_into_grad(bn, at.data(), o->grad.data(), k, m, n);
    }
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  check_rank2("matmul_nt", a);
  check_rank2("matmul_nt", b);
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: inner dimensions differ: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int m = static_cast<int>(a.rows());
  const int k = static_cast<int>(a.cols());
  const int n = static_cast<int>(b.rows());
  auto an = a.node();
  auto bn = b.node();
  std::vector<double> bt(static_cast<size_t>(k) * n);
  kernels::transpose(bn->value.data(), bt.data(), n, k);
  std::vector<double> out(static_cast<size_t>(m) * n);
  kernels::matmul(an->value.data(), bt.data(), out.data(), m, k, n);
  NodePtr o = make_node({m, n}, std::move(out), false);
  bool rec = want_record({&a, &b});
  return finish(o, rec, [an, bn, o, m, k, n]() {
    if (an->requires_grad) {
      matmul_into_grad(an, o->grad.data(), bn->value.data(), m, n, k);
    }
    if (bn->requires_grad) {
      std::vector<double> gt(static_cast<size_t>(n) * m);
      kernels::transpose(o->grad.data(), gt.data(), m, n);
      matmul_into_grad(bn, gt.data(), an->value.data(), n, m, k);
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  auto an = a.node();
  auto bn = b.node();
  std::vector<double> out(an->value.size());
  kernels::add(an->value.data(), bn->value.data(), out.data(),
               static_cast<int>(out.size()));
  NodePtr o = make_node(an->shape, std::move(out), false);
  bool rec = want_record({&a, &b});
  return finish(o, rec, [an, bn, o]() {
    accumulate(an, o->grad);
    accumulate(bn, o->grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return add_scaled(a, b, -1.0);
}

Tensor add_scaled(const Tensor& a, const Tensor& b, double alpha) {
  check_same_shape("add_scaled", a, b);
  auto an = a.node();
  auto bn = b.node();
  std::vector<double> out = an->value;
  kernels::axpy(alpha, bn->value.data(), out.data(),
                static_cast<int>(out.size()));
  NodePtr o = make_node(an->shape, std::move(out), false);
  bool rec = want_record({&a, &b});
  return finish(o, rec, [an, bn, o, alpha]() {
    accumulate(an, o->grad);
    if (bn->requires_grad) {
      bn->ensure_grad();
      kernels::axpy(alpha, o->grad.data(), bn->grad.data(),
                    static_cast<int>(o->grad.size()));
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  auto an = a.node();
  auto bn = b.node();
  std::vector<double> out(an->value.size());
  kernels::mul(an->value.data(), bn->value.data(), out.data(),
               static_cast<int>(out.size()));
  NodePtr o = make_node(an->shape, std::move(out), false);
  bool rec = want_record({&a, &b});
  return finish(o, rec, [an, bn, o]() {
    const size_t n = o->grad.size();
    if (an->requires_grad) {
      an->ensure_grad();
      for (size_t i = 0; i < n; ++i) an->grad[i] += o->grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (size_t i = 0; i < n; ++i) bn->grad[i] += o->grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double alpha) {
  auto an = a.node();
  std::vector<double> out(an->value.size());
  kernels::scale(an->value.data(), alpha, out.data(),
                 static_cast<int>(out.size()));
  NodePtr o = make_node(an->shape, std::move(out), false);
  bool rec = want_record({&a});
  return finish(o, rec, [an, o, alpha]() {
    if (!an->requires_grad) return;
    an->ensure_grad();
    kernels::axpy(alpha, o->grad.data(), an->grad.data(),
                  static_cast<int>(o->grad.size()));
  });
}

Tensor add_scalar(const Tensor& a, double v) {
  auto an = a.node();
  std::vector<double> out(an->value.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = an->value[i] + v;
  NodePtr o = make_node(an->shape, std::move(out), false);
  bool rec = want_record({&a});
  return finish(o, rec, [an, o]() { accumulate(an, o->grad); });
}

// ---- elementwise nonlinearities ---------------------------------------

Tensor silu(const Tensor& a) {
  return unary_op(
      a, [](double x) { return x * stable_sigmoid(x); },
      [](double x, double) {
        double s = stable_sigmoid(x);
        return s * (1.0 + x * (1.0 - s));
      });
}

Tensor selu(const Tensor& a) {
  return unary_op(
      a,
      [](double x) {
        return x > 0.0 ? kSeluLambda * x
                       : kSeluLambda * kSeluAlpha * std::expm1(x);
      },
      [](double x, double y) {
        // for x <= 0: d = lambda*alpha*e^x = y + lambda*alpha
        return x > 0.0 ? kSeluLambda : y + kSeluLambda * kSeluAlpha;
      });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(a, [](double x) { return stable_sigmoid(x); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary_op(a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor abs(const Tensor& a) {
  return unary_op(a, [](double x) { return std::fabs(x); },
                  [](double x, double) {
                    if (x > 0.0) return 1.0;
                    if (x < 0.0) return -1.0;
                    return 0.0;  // subgradient at the kink
                  });
}

Tensor pow(const Tensor& a, double p) {
  return unary_op(a, [p](double x) { return std::pow(x, p); },
                  [p](double x, double) { return p * std::pow(x, p - 1.0); });
}

// ---- reductions --------------------------------------------------------

Tensor sum(const Tensor& a) {
  auto an = a.node();
  double s = 0.0;
  for (double v : an->value) s += v;
  NodePtr o = make_node({1}, {s}, false);
  bool rec = want_record({&a});
  return finish(o, rec, [an, o]() {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const double g = o->grad[0];
    for (auto& gv : an->grad) gv += g;
  });
}

Tensor mean(const Tensor& a) {
  auto an = a.node();
  double s = 0.0;
  for (double v : an->value) s += v;
  const double inv = 1.0 / static_cast<double>(an->value.size());
  NodePtr o = make_node({1}, {s * inv}, false);
  bool rec = want_record({&a});
  return finish(o, rec, [an, o, inv]() {
    if (!an->requires_grad) return;
    an->ensure_grad();
    const double g = o->grad[0] * inv;
    for (auto& gv : an->grad) gv += g;
  });
}

// ---- structured ops ----------------------------------------------------

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  check_rank2("add_bias", x);
  if (bias.rank() != 1 || bias.dim(0) != x.cols()) {
    throw DimensionError("add_bias: bias " + shape_str(bias.shape()) +
                         " does not match columns of " + shape_str(x.shape()));
  }
  const int r = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  auto xn = x.node();
  auto bn = bias.node();
  std::vector<double> out(xn->value.size());
  for (int i = 0; i < r; ++i) {
    kernels::add(xn->value.data() + static_cast<size_t>(i) * c,
                 bn->value.data(), out.data() + static_cast<size_t>(i) * c, c);
  }
  NodePtr o = make_node(xn->shape, std::move(out), false);
  bool rec = want_record({&x, &bias});
  return finish(o, rec, [xn, bn, o, r, c]() {
    accumulate(xn, o->grad);
    if (bn->requires_grad) {
      std::vector<double> cs(c);
      kernels::colsum(o->grad.data(), cs.data(), r, c);
      accumulate(bn, cs);
    }
  });
}

Tensor row_softmax(const Tensor& x) {
  check_rank2("row_softmax", x);
  const int r = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  auto xn = x.node();
  std::vector<double> out(xn->value.size());
  for (int i = 0; i < r; ++i) {
    const double* row = xn->value.data() + static_cast<size_t>(i) * c;
    double* orow = out.data() + static_cast<size_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int j = 0; j < c; ++j) {
      orow[j] = std::exp(row[j] - mx);
      denom += orow[j];
    }
    const double inv = 1.0 / denom;
    for (int j = 0; j < c; ++j) orow[j] *= inv;
  }
  NodePtr o = make_node(xn->shape, std::move(out), false);
  bool rec = want_record({&x});
  return finish(o, rec, [xn, o, r, c]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* y = o->value.data() + static_cast<size_t>(i) * c;
      const double* gy = o->grad.data() + static_cast<size_t>(i) * c;
      double* gx = xn->grad.data() + static_cast<size_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += gy[j] * y[j];
      for (int j = 0; j < c; ++j) gx[j] += y[j] * (gy[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  check_rank2("layer_norm", x);
  const int r = static_cast<int>(x.rows());
  const int c = static_cast<int>(x.cols());
  if (gamma.rank() != 1 || gamma.dim(0) != c || beta.rank() != 1 ||
      beta.dim(0) != c) {
    throw DimensionError("layer_norm: scale/shift must be length " +
                         std::to_string(c));
  }
  auto xn = x.node();
  auto gn = gamma.node();
  auto bn = beta.node();
  std::vector<double> out(xn->value.size());
  auto xhat = std::make_shared<std::vector<double>>(xn->value.size());
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (int i = 0; i < r; ++i) {
    const double* row = xn->value.data() + static_cast<size_t>(i) * c;
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += row[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double d = row[j] - mu;
      var += d * d;
    }
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    double* xh = xhat->data() + static_cast<size_t>(i) * c;
    double* orow = out.data() + static_cast<size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      xh[j] = (row[j] - mu) * inv;
      orow[j] = gn->value[j] * xh[j] + bn->value[j];
    }
  }
  NodePtr o = make_node(xn->shape, std::move(out), false);
  bool rec = want_record({&x, &gamma, &beta});
  return finish(o, rec, [xn, gn, bn, o, xhat, inv_std, r, c]() {
    if (bn->requires_grad) {
      std::vector<double> cs(c);
      kernels::colsum(o->grad.data(), cs.data(), r, c);
      accumulate(bn, cs);
    }
    if (gn->requires_grad) {
      gn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const double* gy = o->grad.data() + static_cast<size_t>(i) * c;
        const double* xh = xhat->data() + static_cast<size_t>(i) * c;
        for (int j = 0; j < c; ++j) gn->grad[j] += gy[j] * xh[j];
      }
    }
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (int i = 0; i < r; ++i) {
        const double* gy = o->grad.data() + static_cast<size_t>(i) * c;
        const double* xh = xhat->data() + static_cast<size_t>(i) * c;
        double* gx = xn->grad.data() + static_cast<size_t>(i) * c;
        double mean_g = 0.0, mean_gx = 0.0;
        for (int j = 0; j < c; ++j) {
          const double g = gy[j] * gn->value[j];
          mean_g += g;
          mean_gx += g * xh[j];
        }
        mean_g /= c;
        mean_gx /= c;
        const double inv = (*inv_std)[i];
        for (int j = 0; j < c; ++j) {
          const double g = gy[j] * gn->value[j];
          gx[j] += inv * (g - mean_g - xh[j] * mean_gx);
        }
      }
    }
  });
}

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1) {
  check_rank2("slice_rows", x);
  if (r0 < 0 || r1 > x.rows() || r0 >= r1) {
    throw DimensionError("slice_rows: range [" + std::to_string(r0) + ", " +
                         std::to_string(r1) + ") invalid for " +
                         shape_str(x.shape()));
  }
  const int64_t c = x.cols();
  auto xn = x.node();
  std::vector<double> out(xn->value.begin() + r0 * c,
                          xn->value.begin() + r1 * c);
  NodePtr o = make_node({r1 - r0, c}, std::move(out), false);
  bool rec = want_record({&x});
  return finish(o, rec, [xn, o, r0, c]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    kernels::add(xn->grad.data() + r0 * c, o->grad.data(),
                 xn->grad.data() + r0 * c, static_cast<int>(o->grad.size()));
  });
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
  check_rank2("slice_cols", x);
  if (c0 < 0 || c1 > x.cols() || c0 >= c1) {
    throw DimensionError("slice_cols: range [" + std::to_string(c0) + ", " +
                         std::to_string(c1) + ") invalid for " +
                         shape_str(x.shape()));
  }
  const int64_t r = x.rows();
  const int64_t c = x.cols();
  const int64_t w = c1 - c0;
  auto xn = x.node();
  std::vector<double> out(static_cast<size_t>(r) * w);
  for (int64_t i = 0; i < r; ++i) {
    std::copy_n(xn->value.data() + i * c + c0, w, out.data() + i * w);
  }
  NodePtr o = make_node({r, w}, std::move(out), false);
  bool rec = want_record({&x});
  return finish(o, rec, [xn, o, r, c, c0, w]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (int64_t i = 0; i < r; ++i) {
      const double* g = o->grad.data() + i * w;
      double* gx = xn->grad.data() + i * c + c0;
      for (int64_t j = 0; j < w; ++j) gx[j] += g[j];
    }
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: empty part list");
  const int64_t c = parts[0].cols();
  int64_t total = 0;
  for (const Tensor& p : parts) {
    check_rank2("concat_rows", p);
    if (p.cols() != c) {
      throw DimensionError("concat_rows: column mismatch: " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.rows();
  }
  std::vector<double> out;
  out.reserve(static_cast<size_t>(total) * c);
  std::vector<NodePtr> nodes;
  nodes.reserve(parts.size());
  bool rec = false;
  for (const Tensor& p : parts) {
    out.insert(out.end(), p.node()->value.begin(), p.node()->value.end());
    nodes.push_back(p.node());
    rec = rec || p.requires_grad();
  }
  rec = rec && GradTape::active() != nullptr;
  NodePtr o = make_node({total, c}, std::move(out), false);
  return finish(o, rec, [nodes, o]() {
    size_t off = 0;
    for (const NodePtr& n : nodes) {
      if (n->requires_grad) {
        n->ensure_grad();
        kernels::add(n->grad.data(), o->grad.data() + off, n->grad.data(),
                     static_cast<int>(n->value.size()));
      }
      off += n->value.size();
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: empty part list");
  const int64_t r = parts[0].rows();
  int64_t total = 0;
  for (const Tensor& p : parts) {
    check_rank2("concat_cols", p);
    if (p.rows() != r) {
      throw DimensionError("concat_cols: row mismatch: " +
                           shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    total += p.cols();
  }
  std::vector<double> out(static_cast<size_t>(r) * total);
  std::vector<NodePtr> nodes;
  std::vector<int64_t> widths;
  bool rec = false;
  int64_t off = 0;
  for (const Tensor& p : parts) {
    const int64_t w = p.cols();
    for (int64_t i = 0; i < r; ++i) {
      std::copy_n(p.node()->value.data() + i * w, w,
                  out.data() + i * total + off);
    }
    nodes.push_back(p.node());
    widths.push_back(w);
    rec = rec || p.requires_grad();
    off += w;
  }
  rec = rec && GradTape::active() != nullptr;
  NodePtr o = make_node({r, total}, std::move(out), false);
  return finish(o, rec, [nodes, widths, o, r, total]() {
    int64_t off = 0;
    for (size_t p = 0; p < nodes.size(); ++p) {
      const NodePtr& n = nodes[p];
      const int64_t w = widths[p];
      if (n->requires_grad) {
        n->ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
          const double* g = o->grad.data() + i * total + off;
          double* gn = n->grad.data() + i * w;
          for (int64_t j = 0; j < w; ++j) gn[j] += g[j];
        }
      }
      off += w;
    }
  });
}

Tensor take_rows(const Tensor& x, const std::vector<int64_t>& rows) {
  check_rank2("take_rows", x);
  const int64_t c = x.cols();
  auto xn = x.node();
  std::vector<double> out(rows.size() * static_cast<size_t>(c));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw DimensionError("take_rows: row " + std::to_string(rows[i]) +
                           " out of range for " + shape_str(x.shape()));
    }
    std::copy_n(xn->value.data() + rows[i] * c, c, out.data() + i * c);
  }
  NodePtr o = make_node({static_cast<int64_t>(rows.size()), c},
                        std::move(out), false);
  bool rec = want_record({&x});
  auto idx = rows;
  return finish(o, rec, [xn, o, idx, c]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < idx.size(); ++i) {
      const double* g = o->grad.data() + i * c;
      double* gx = xn->grad.data() + idx[i] * c;
      for (int64_t j = 0; j < c; ++j) gx[j] += g[j];
    }
  });
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw ContractError("dropout: rate must be < 1");
  auto xn = x.node();
  const double keep = 1.0 - rate;
  const double inv = 1.0 / keep;
  auto mask = std::make_shared<std::vector<double>>(xn->value.size());
  std::vector<double> out(xn->value.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : inv;
    (*mask)[i] = m;
    out[i] = xn->value[i] * m;
  }
  NodePtr o = make_node(xn->shape, std::move(out), false);
  bool rec = want_record({&x});
  return finish(o, rec, [xn, o, mask]() {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (size_t i = 0; i < o->grad.size(); ++i) {
      xn->grad[i] += o->grad[i] * (*mask)[i];
    }
  });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, int64_t batch,
                        int64_t seq) {
  check_rank2("depthwise_conv1d", x);
  check_rank2("depthwise_conv1d", kernel);
  const int64_t c = x.cols();
  const int64_t k = kernel.rows();
  if (kernel.cols() != c) {
    throw DimensionError("depthwise_conv1d: kernel " +
                         shape_str(kernel.shape()) +
                         " does not match channels of " +
                         shape_str(x.shape()));
  }
  if (k % 2 == 0) {
    throw DimensionError("depthwise_conv1d: kernel size must be odd, got " +
                         std::to_string(k));
  }
  if (batch * seq != x.rows()) {
    throw DimensionError("depthwise_conv1d: batch*seq != rows of " +
                         shape_str(x.shape()));
  }
  const int64_t pad = (k - 1) / 2;
  auto xn = x.node();
  auto kn = kernel.node();
  std::vector<double> out(xn->value.size(), 0.0);
  for (int64_t b = 0; b < batch; ++b) {
    const double* xb = xn->value.data() + b * seq * c;
    double* ob = out.data() + b * seq * c;
    for (int64_t s = 0; s < seq; ++s) {
      double* orow = ob + s * c;
      for (int64_t j = 0; j < k; ++j) {
        const int64_t t = s + j - pad;
        if (t < 0 || t >= seq) continue;
        const double* xrow = xb + t * c;
        const double* krow = kn->value.data() + j * c;
        for (int64_t ch = 0; ch < c; ++ch) orow[ch] += krow[ch] * xrow[ch];
      }
    }
  }
  NodePtr o = make_node(xn->shape, std::move(out), false);
  bool rec = want_record({&x, &kernel});
  return finish(o, rec, [xn, kn, o, batch, seq, c, k, pad]() {
    if (xn->requires_grad) {
      xn->ensure_grad();
      for (int64_t b = 0; b < batch; ++b) {
        const double* gb = o->grad.data() + b * seq * c;
        double* gxb = xn->grad.data() + b * seq * c;
        for (int64_t s = 0; s < seq; ++s) {
          double* gxrow = gxb + s * c;
          for (int64_t j = 0; j < k; ++j) {
            const int64_t u = s - j + pad;  // output position fed by x[s]
            if (u < 0 || u >= seq) continue;
            const double* grow = gb + u * c;
            const double* krow = kn->value.data() + j * c;
            for (int64_t ch = 0; ch < c; ++ch) {
              gxrow[ch] += krow[ch] * grow[ch];
            }
          }
        }
      }
    }
    if (kn->requires_grad) {
      kn->ensure_grad();
      for (int64_t b = 0; b < batch; ++b) {
        const double* xb = xn->value.data() + b * seq * c;
        const double* gb = o->grad.data() + b * seq * c;
        for (int64_t s = 0; s < seq; ++s) {
          const double* grow = gb + s * c;
          for (int64_t j = 0; j < k; ++j) {
            const int64_t t = s + j - pad;
            if (t < 0 || t >= seq) continue;
            const double* xrow = xb + t * c;
            double* gkrow = kn->grad.data() + j * c;
            for (int64_t ch = 0; ch < c; ++ch) {
              gkrow[ch] += xrow[ch] * grow[ch];
            }
          }
        }
      }
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels) {
  check_rank2("softmax_cross_entropy", logits);
  const int64_t b = logits.rows();
  const int64_t c = logits.cols();
  if (static_cast<int64_t>(labels.size()) != b) {
    throw DimensionError("softmax_cross_entropy: " +
                         std::to_string(labels.size()) + " labels for " +
                         std::to_string(b) + " rows");
  }
  auto ln = logits.node();
  auto probs = std::make_shared<std::vector<double>>(ln->value.size());
  double loss = 0.0;
  for (int64_t i = 0; i < b; ++i) {
    if (labels[i] < 0 || labels[i] >= c) {
      throw ContractError("softmax_cross_entropy: label out of range");
    }
    const double* row = ln->value.data() + i * c;
    double* prow = probs->data() + i * c;
    double mx = row[0];
    for (int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (int64_t j = 0; j < c; ++j) {
      prow[j] = std::exp(row[j] - mx);
      denom += prow[j];
    }
    loss += std::log(denom) + mx - row[labels[i]];
    const double inv = 1.0 / denom;
    for (int64_t j = 0; j < c; ++j) prow[j] *= inv;
  }
  loss /= static_cast<double>(b);
  NodePtr o = make_node({1}, {loss}, false);
  bool rec = want_record({&logits});
  auto lab = labels;
  return finish(o, rec, [ln, o, probs, lab, b, c]() {
    if (!ln->requires_grad) return;
    ln->ensure_grad();
    const double g = o->grad[0] / static_cast<double>(b);
    for (int64_t i = 0; i < b; ++i) {
      const double* prow = probs->data() + i * c;
      double* grow = ln->grad.data() + i * c;
      for (int64_t j = 0; j < c; ++j) {
        grow[j] += g * (prow[j] - (j == lab[i] ? 1.0 : 0.0));
      }
    }
  });
}

// ---- fused-op support ----------------------------------------------------

namespace ops_detail {

bool recording(std::initializer_list<const Tensor*> inputs) {
  if (GradTape::active() == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

Tensor make_op_output(Shape shape, std::vector<double> value, bool rec,
                      std::function<void(const detail::Node&)> backward) {
  check_positive_dims(shape);
  if (shape_numel(shape) != static_cast<int64_t>(value.size())) {
    throw DimensionError("make_op_output: value length does not match " +
                         shape_str(shape));
  }
  NodePtr o = make_node(std::move(shape), std::move(value), false);
  return finish(o, rec, [o, fn = std::move(backward)]() { fn(*o); });
}

void grad_accumulate(const std::shared_ptr<detail::Node>& n,
                     std::span<const double> g) {
  accumulate(n, g);
}

}  // namespace ops_detail

// ---- gradient checking -------------------------------------------------

namespace {

double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

}  // namespace

double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& x, double h) {
  if (h <= 0.0) throw ContractError("grad_check: step must be positive");
  Tensor leaf = x.clone();
  leaf.set_requires_grad(true);
  std::vector<double> analytic;
  {
    GradTape tape;
    GradTape::Scope scope(tape);
    Tensor y = f(leaf);
    if (y.numel() != 1) {
      throw ContractError("grad_check: function must return a scalar, got " +
                          shape_str(y.shape()));
    }
    tape.backward(y);
    analytic.assign(leaf.grad().begin(), leaf.grad().end());
  }
  Tensor probe = x.clone();
  probe.set_requires_grad(false);
  auto eval = [&]() {
    Tensor y = f(probe);
    if (y.numel() != 1) {
      throw ContractError("grad_check: function must return a scalar, got " +
                          shape_str(y.shape()));
    }
    return y.item();
  };
  double worst = 0.0;
  auto data = probe.mutable_data();
  for (size_t i = 0; i < data.size(); ++i) {
    const double orig = data[i];
    data[i] = orig + h;
    const double fp = eval();
    data[i] = orig - h;
    const double fm = eval();
    data[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    worst = std::max(worst, rel_err(analytic[i], numeric));
  }
  return worst;
}

double grad_check_params(const std::function<Tensor()>& fn,
                         const std::vector<Tensor>& params, double h) {
  if (h <= 0.0) throw ContractError("grad_check: step must be positive");
  std::vector<std::vector<double>> analytic;
  {
    for (auto p : params) p.zero_grad();
    GradTape tape;
    GradTape::Scope scope(tape);
    Tensor y = fn();
    if (y.numel() != 1) {
      throw ContractError("grad_check: function must return a scalar, got " +
                          shape_str(y.shape()));
    }
    tape.backward(y);
    for (const auto& p : params) {
      if (p.has_grad()) {
        analytic.emplace_back(p.grad().begin(), p.grad().end());
      } else {
        analytic.emplace_back(p.numel(), 0.0);
      }
    }
  }
  auto eval = [&]() {
    Tensor y = fn();
    return y.item();
  };
  double worst = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    auto data = p.mutable_data();
    for (size_t i = 0; i < data.size(); ++i) {
      const double orig = data[i];
      data[i] = orig + h;
      const double fp = eval();
      data[i] = orig - h;
      const double fm = eval();
      data[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      worst = std::max(worst, rel_err(analytic[pi][i], numeric));
    }
  }
  return worst;
}

}  // namespace ssdkan
