// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/grkan.hpp"

#include <algorithm>
#include <cmath>

#include "ssdkan/kernels.hpp"
#include "ssdkan/rng.hpp"

namespace ssdkan {

namespace {

constexpr uint64_t kGainSeed = 0x67616e6974656d6fULL;

// Householder QR least-squares solve of min ||A x - y||, A is rows x cols
// row-major, rows >= cols. Throws FitError on rank deficiency.
std::vector<double> qr_solve(std::vector<double> a, std::vector<double> y,
                             int rows, int cols) {
  if (rows < cols) {
    throw FitError("rational fit: " + std::to_string(rows) +
                   " samples cannot determine " + std::to_string(cols) +
                   " coefficients");
  }
  std::vector<double> v(rows);
  for (int c = 0; c < cols; ++c) {
    double norm = 0.0;
    for (int r = c; r < rows; ++r) {
      const double x = a[static_cast<size_t>(r) * cols + c];
      norm += x * x;
    }
    norm = std::sqrt(norm);
    const double pivot = a[static_cast<size_t>(c) * cols + c];
    const double alpha = pivot >= 0.0 ? -norm : norm;
    v[c] = pivot - alpha;
    double vnorm2 = v[c] * v[c];
    for (int r = c + 1; r < rows; ++r) {
      v[r] = a[static_cast<size_t>(r) * cols + c];
      vnorm2 += v[r] * v[r];
    }
    a[static_cast<size_t>(c) * cols + c] = alpha;
    for (int r = c + 1; r < rows; ++r) {
      a[static_cast<size_t>(r) * cols + c] = 0.0;
    }
    if (vnorm2 <= 0.0) continue;
    // H = I - 2 v v^T / (v^T v) applied to the remaining columns and rhs
    for (int j = c + 1; j < cols; ++j) {
      double dot = 0.0;
      for (int r = c; r < rows; ++r) {
        dot += v[r] * a[static_cast<size_t>(r) * cols + j];
      }
      const double f = 2.0 * dot / vnorm2;
      for (int r = c; r < rows; ++r) {
        a[static_cast<size_t>(r) * cols + j] -= f * v[r];
      }
    }
    {
      double dot = 0.0;
      for (int r = c; r < rows; ++r) dot += v[r] * y[r];
      const double f = 2.0 * dot / vnorm2;
      for (int r = c; r < rows; ++r) y[r] -= f * v[r];
    }
  }
  double dmax = 0.0;
  double dmin = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cols; ++c) {
    const double d = std::fabs(a[static_cast<size_t>(c) * cols + c]);
    dmax = std::max(dmax, d);
    dmin = std::min(dmin, d);
  }
  if (!(dmin > dmax * 1e-13)) {
    throw FitError(
        "rational fit: normal equations are numerically singular "
        "(diagonal ratio " +
        std::to_string(dmin / (dmax > 0 ? dmax : 1.0)) + ")");
  }
  std::vector<double> x(cols);
  for (int c = cols - 1; c >= 0; --c) {
    double s = y[c];
    for (int j = c + 1; j < cols; ++j) {
      s -= a[static_cast<size_t>(c) * cols + j] * x[j];
    }
    x[c] = s / a[static_cast<size_t>(c) * cols + c];
  }
  return x;
}

double eval_safe(const std::vector<double>& num, const std::vector<double>& den,
                 double x) {
  double p = num.back();
  for (int j = static_cast<int>(num.size()) - 2; j >= 0; --j) {
    p = p * x + num[j];
  }
  double q = 1.0;
  if (!den.empty()) {
    double s = den.back();
    for (int j = static_cast<int>(den.size()) - 2; j >= 0; --j) {
      s = s * x + den[j];
    }
    s = s * x;
    q = 1.0 + std::fabs(s);
  }
  return p / q;
}

}  // namespace

double RationalFn::operator()(double x) const { return eval_safe(num, den, x); }

double rational_eval(const RationalFn& fn, double x) { return fn(x); }

RationalFn RationalFn::identity(int num_order, int den_order) {
  if (num_order < 1) {
    throw ContractError("rational identity needs numerator order >= 1");
  }
  RationalFn fn;
  fn.num.assign(num_order + 1, 0.0);
  fn.num[1] = 1.0;
  fn.den.assign(den_order, 0.0);
  return fn;
}

RationalFn RationalFn::zero(int num_order, int den_order) {
  RationalFn fn;
  fn.num.assign(num_order + 1, 0.0);
  fn.den.assign(den_order, 0.0);
  return fn;
}

double estimate_gain(const RationalFn& fn, int64_t samples) {
  if (samples < 1) throw ContractError("estimate_gain: samples must be >= 1");
  Rng rng(kGainSeed);
  constexpr int kChunk = 4096;
  std::vector<double> z(kChunk);
  std::vector<double> out(kChunk);
  double acc = 0.0;
  int64_t done = 0;
  while (done < samples) {
    const int n = static_cast<int>(std::min<int64_t>(kChunk, samples - done));
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    kernels::rational(z.data(), out.data(), n, fn.num.data(),
                      static_cast<int>(fn.num.size()), fn.den.data(),
                      static_cast<int>(fn.den.size()));
    for (int i = 0; i < n; ++i) acc += out[i] * out[i];
    done += n;
  }
  return acc / static_cast<double>(samples);
}

RationalFit fit_rational_to_function(
    const std::function<double(double)>& target, int num_order, int den_order,
    double lo, double hi, int samples) {
  if (num_order < 0 || den_order < 0) {
    throw ContractError("rational fit: orders must be non-negative");
  }
  if (!(lo < hi)) throw ContractError("rational fit: empty domain");
  if (samples < 2) throw ContractError("rational fit: need >= 2 samples");

  const int na = num_order + 1;
  const int nb = den_order;
  const int cols = na + nb;

  std::vector<double> xs(samples);
  std::vector<double> ys(samples);
  for (int i = 0; i < samples; ++i) {
    xs[i] = lo + (hi - lo) * i / (samples - 1);
    ys[i] = target(xs[i]);
  }

  auto max_err = [&](const std::vector<double>& num,
                     const std::vector<double>& den) {
    const int dense = samples * 10;
    double worst = 0.0;
    for (int i = 0; i < dense; ++i) {
      const double x = lo + (hi - lo) * i / (dense - 1);
      worst = std::max(worst, std::fabs(eval_safe(num, den, x) - target(x)));
    }
    return worst;
  };

  // Gauss-Newton refinement of the true safe-form residual, with simple
  // damping; keeps the best iterate.
  auto refine = [&](std::vector<double> num, std::vector<double> den) {
    auto sse = [&](const std::vector<double>& a, const std::vector<double>& b) {
      double s = 0.0;
      for (int i = 0; i < samples; ++i) {
        const double r = eval_safe(a, b, xs[i]) - ys[i];
        s += r * r;
      }
      return s;
    };
    double best = sse(num, den);
    for (int iter = 0; iter < 60; ++iter) {
      std::vector<double> jac(static_cast<size_t>(samples + cols) * cols, 0.0);
      std::vector<double> rhs(samples + cols, 0.0);
      for (int i = 0; i < samples; ++i) {
        const double x = xs[i];
        double p = num.back();
        for (int j = na - 2; j >= 0; --j) p = p * x + num[j];
        double s = 0.0;
        double sgn = 0.0;
        if (nb > 0) {
          s = den.back();
          for (int j = nb - 2; j >= 0; --j) s = s * x + den[j];
          s = s * x;
          sgn = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
        }
        const double q = 1.0 + std::fabs(s);
        const double phi = p / q;
        double* row = jac.data() + static_cast<size_t>(i) * cols;
        double xp = 1.0;
        for (int j = 0; j < na; ++j) {
          row[j] = xp / q;
          xp *= x;
        }
        xp = x;
        for (int j = 0; j < nb; ++j) {
          row[na + j] = -phi / q * sgn * xp;
          xp *= x;
        }
        rhs[i] = ys[i] - phi;
      }
      const double mu = 1e-9;
      for (int j = 0; j < cols; ++j) {
        jac[static_cast<size_t>(samples + j) * cols + j] = mu;
      }
      std::vector<double> delta;
      try {
        delta = qr_solve(std::move(jac), std::move(rhs), samples + cols, cols);
      } catch (const FitError&) {
        break;
      }
      std::vector<double> cand_num = num;
      std::vector<double> cand_den = den;
      double step = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 8; ++ls) {
        for (int j = 0; j < na; ++j) cand_num[j] = num[j] + step * delta[j];
        for (int j = 0; j < nb; ++j) {
          cand_den[j] = den[j] + step * delta[na + j];
        }
        const double cand = sse(cand_num, cand_den);
        if (cand < best) {
          best = cand;
          num = cand_num;
          den = cand_den;
          improved = true;
          break;
        }
        step *= 0.5;
      }
      if (!improved) break;
    }
    return std::make_pair(num, den);
  };

  // Start 1: linearized fit of t * (1 + s) = P with a small ridge on the
  // denominator coefficients to break ties toward s = 0.
  std::vector<double> num0(na, 0.0);
  std::vector<double> den0(nb, 0.0);
  {
    const int rows = samples + nb;
    std::vector<double> a(static_cast<size_t>(rows) * cols, 0.0);
    std::vector<double> y(rows, 0.0);
    for (int i = 0; i < samples; ++i) {
      double* row = a.data() + static_cast<size_t>(i) * cols;
      double xp = 1.0;
      for (int j = 0; j < na; ++j) {
        row[j] = xp;
        xp *= xs[i];
      }
      xp = xs[i];
      for (int j = 0; j < nb; ++j) {
        row[na + j] = -ys[i] * xp;
        xp *= xs[i];
      }
      y[i] = ys[i];
    }
    const double ridge = 1e-6;
    for (int j = 0; j < nb; ++j) {
      a[static_cast<size_t>(samples + j) * cols + na + j] = ridge;
    }
    auto sol = qr_solve(std::move(a), std::move(y), rows, cols);
    std::copy_n(sol.begin(), na, num0.begin());
    std::copy_n(sol.begin() + na, nb, den0.begin());
  }
  auto [num1, den1] = refine(num0, den0);
  const double err1 = max_err(num1, den1);

  // Start 2: plain polynomial (denominator zero).
  std::vector<double> num2(na, 0.0);
  std::vector<double> den2(nb, 0.0);
  {
    std::vector<double> a(static_cast<size_t>(samples) * na, 0.0);
    std::vector<double> y = ys;
    for (int i = 0; i < samples; ++i) {
      double xp = 1.0;
      for (int j = 0; j < na; ++j) {
        a[static_cast<size_t>(i) * na + j] = xp;
        xp *= xs[i];
      }
    }
    auto sol = qr_solve(std::move(a), std::move(y), samples, na);
    std::copy_n(sol.begin(), na, num2.begin());
  }
  auto [num3, den3] = refine(num2, den2);
  const double err2 = max_err(num3, den3);

  RationalFit fit;
  if (err1 <= err2) {
    fit.fn.num = num1;
    fit.fn.den = den1;
    fit.max_abs_error = err1;
  } else {
    fit.fn.num = num3;
    fit.fn.den = den3;
    fit.max_abs_error = err2;
  }
  return fit;
}

// ---- GrKanLayer ------------------------------------------------------

GrKanLayer::GrKanLayer(int input_dim, int output_dim, int groups,
                       bool has_bias, int num_order, int den_order)
    : input_dim_(input_dim),
      output_dim_(output_dim),
      groups_(groups),
      num_order_(num_order),
      den_order_(den_order) {
  if (input_dim < 1 || output_dim < 1 || groups < 1) {
    throw ContractError("grkan layer: widths and group count must be >= 1");
  }
  if (input_dim % groups != 0) {
    throw DimensionError("grkan layer: group count " + std::to_string(groups) +
                         " does not divide input width " +
                         std::to_string(input_dim));
  }
  if (num_order < 1 || den_order < 1) {
    throw ContractError("grkan layer: orders must be >= 1");
  }
  num_ = Tensor::zeros({groups, num_order + 1}, true);
  den_ = Tensor::zeros({groups, den_order}, true);
  weight_ = Tensor::zeros({input_dim, output_dim}, true);
  if (has_bias) bias_ = Tensor::zeros({output_dim}, true);
}

GrKanLayer GrKanLayer::variance_preserving_init(int input_dim, int output_dim,
                                                int groups,
                                                const RationalFn& activation,
                                                uint64_t seed, bool has_bias) {
  const double alpha = estimate_gain(activation);
  if (alpha < 1e-12) {
    throw InitError(
        "variance-preserving init: activation gain below 1e-12, the "
        "activation is numerically zero");
  }
  GrKanLayer layer(input_dim, output_dim, groups, has_bias,
                   std::max(activation.num_order(), 1),
                   std::max(activation.den_order(), 1));
  for (int g = 0; g < groups; ++g) layer.set_group_rational(g, activation);
  Rng rng(seed);
  const double stddev = std::sqrt(1.0 / (alpha * input_dim));
  for (auto& v : layer.weight_.mutable_data()) v = rng.normal() * stddev;
  layer.init_gain_ = alpha;
  return layer;
}

GrKanLayer GrKanLayer::load_from_mlp(const Tensor& weight, const Tensor& bias,
                                     int groups, int num_order,
                                     int den_order) {
  if (weight.rank() != 2) {
    throw DimensionError("load_from_mlp: weight must be rank-2, got " +
                         shape_str(weight.shape()));
  }
  const int input_dim = static_cast<int>(weight.rows());
  const int output_dim = static_cast<int>(weight.cols());
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != output_dim)) {
    throw DimensionError("load_from_mlp: bias " + shape_str(bias.shape()) +
                         " does not match weight " +
                         shape_str(weight.shape()));
  }
  RationalFit fit = fit_rational_to_function(
      [](double x) { return x; }, num_order, den_order, -3.0, 3.0);
  GrKanLayer layer(input_dim, output_dim, groups, bias.defined(), num_order,
                   den_order);
  for (int g = 0; g < groups; ++g) layer.set_group_rational(g, fit.fn);
  std::copy(weight.data().begin(), weight.data().end(),
            layer.weight_.mutable_data().begin());
  if (bias.defined()) {
    std::copy(bias.data().begin(), bias.data().end(),
              layer.bias_.mutable_data().begin());
  }
  layer.load_fit_error_ = fit.max_abs_error;
  return layer;
}

RationalFn GrKanLayer::group_rational(int g) const {
  if (g < 0 || g >= groups_) {
    throw ContractError("grkan layer: group index out of range");
  }
  RationalFn fn;
  auto nd = num_.data();
  auto dd = den_.data();
  fn.num.assign(nd.begin() + static_cast<size_t>(g) * (num_order_ + 1),
                nd.begin() + static_cast<size_t>(g + 1) * (num_order_ + 1));
  fn.den.assign(dd.begin() + static_cast<size_t>(g) * den_order_,
                dd.begin() + static_cast<size_t>(g + 1) * den_order_);
  return fn;
}

void GrKanLayer::set_group_rational(int g, const RationalFn& fn) {
  if (g < 0 || g >= groups_) {
    throw ContractError("grkan layer: group index out of range");
  }
  if (fn.num_order() > num_order_ || fn.den_order() > den_order_) {
    throw DimensionError("grkan layer: rational orders (" +
                         std::to_string(fn.num_order()) + ", " +
                         std::to_string(fn.den_order()) +
                         ") exceed layer orders (" +
                         std::to_string(num_order_) + ", " +
                         std::to_string(den_order_) + ")");
  }
  auto nd = num_.mutable_data();
  auto dd = den_.mutable_data();
  for (int j = 0; j <= num_order_; ++j) {
    nd[static_cast<size_t>(g) * (num_order_ + 1) + j] =
        j < static_cast<int>(fn.num.size()) ? fn.num[j] : 0.0;
  }
  for (int j = 0; j < den_order_; ++j) {
    dd[static_cast<size_t>(g) * den_order_ + j] =
        j < static_cast<int>(fn.den.size()) ? fn.den[j] : 0.0;
  }
}

Tensor GrKanLayer::activations(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != input_dim_) {
    throw DimensionError("grkan layer: input " + shape_str(x.shape()) +
                         " does not match width " +
                         std::to_string(input_dim_));
  }
  const int rows = static_cast<int>(x.rows());
  const int gs = group_size();
  const int na = num_order_ + 1;
  const int nb = den_order_;
  auto xn = x.node();
  auto an = num_.node();
  auto bn = den_.node();

  std::vector<double> out(xn->value.size());
  for (int r = 0; r < rows; ++r) {
    for (int g = 0; g < groups_; ++g) {
      const size_t off = static_cast<size_t>(r) * input_dim_ +
                         static_cast<size_t>(g) * gs;
      kernels::rational(xn->value.data() + off, out.data() + off, gs,
                        an->value.data() + static_cast<size_t>(g) * na, na,
                        bn->value.data() + static_cast<size_t>(g) * nb, nb);
    }
  }

  bool rec = ops_detail::recording({&x, &num_, &den_});
  const int groups = groups_;
  const int input_dim = input_dim_;
  return ops_detail::make_op_output(
      {rows, input_dim_}, std::move(out), rec,
      [xn, an, bn, rows, groups, gs, na, nb, input_dim](
          const detail::Node& o) {
        const bool gx = xn->requires_grad;
        const bool ga = an->requires_grad;
        const bool gb = bn->requires_grad;
        if (gx) xn->ensure_grad();
        if (ga) an->ensure_grad();
        if (gb) bn->ensure_grad();
        for (int r = 0; r < rows; ++r) {
          for (int g = 0; g < groups; ++g) {
            const double* acoef = an->value.data() + static_cast<size_t>(g) * na;
            const double* bcoef = bn->value.data() + static_cast<size_t>(g) * nb;
            double* agrad = ga ? an->grad.data() + static_cast<size_t>(g) * na
                               : nullptr;
            double* bgrad = gb ? bn->grad.data() + static_cast<size_t>(g) * nb
                               : nullptr;
            for (int c = 0; c < gs; ++c) {
              const size_t e = static_cast<size_t>(r) * input_dim +
                               static_cast<size_t>(g) * gs + c;
              const double go = o.grad[e];
              const double xv = xn->value[e];
              // recompute P, P', s, s'
              double p = acoef[na - 1];
              double dp = 0.0;
              for (int j = na - 2; j >= 0; --j) {
                dp = dp * xv + p;
                p = p * xv + acoef[j];
              }
              double s = 0.0;
              double dss = 0.0;
              if (nb > 0) {
                double t = bcoef[nb - 1];
                double dt = 0.0;
                for (int j = nb - 2; j >= 0; --j) {
                  dt = dt * xv + t;
                  t = t * xv + bcoef[j];
                }
                dss = dt * xv + t;  // d/dx (t * x)
                s = t * xv;
              }
              const double sgn = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
              const double q = 1.0 + std::fabs(s);
              const double qinv = 1.0 / q;
              const double phi = p * qinv;
              if (gx) {
                xn->grad[e] += go * (dp - phi * sgn * dss) * qinv;
              }
              if (agrad != nullptr) {
                double xp = 1.0;
                for (int j = 0; j < na; ++j) {
                  agrad[j] += go * xp * qinv;
                  xp *= xv;
                }
              }
              if (bgrad != nullptr) {
                const double f = -go * phi * qinv * sgn;
                double xp = xv;
                for (int j = 0; j < nb; ++j) {
                  bgrad[j] += f * xp;
                  xp *= xv;
                }
              }
            }
          }
        }
      });
}

Tensor GrKanLayer::forward(const Tensor& x) const {
  Tensor act = activations(x);
  Tensor out = matmul(act, weight_);
  if (bias_.defined()) out = add_bias(out, bias_);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> GrKanLayer::named_parameters(
    const std::string& prefix) {
  std::vector<std::pair<std::string, Tensor*>> out = {
      {prefix + ".num", &num_},
      {prefix + ".den", &den_},
      {prefix + ".weight", &weight_}};
  if (bias_.defined()) out.emplace_back(prefix + ".bias", &bias_);
  return out;
}

}  // namespace ssdkan
