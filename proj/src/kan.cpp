// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/kan.hpp"

#include <algorithm>
#include <cmath>

#include "ssdkan/kernels.hpp"

namespace ssdkan {

namespace {

double silu_value(double x) {
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
  return x * s;
}

double silu_derivative(double x) {
  const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                            : std::exp(x) / (1.0 + std::exp(x));
  return s * (1.0 + x * (1.0 - s));
}

}  // namespace

KnotGrid::KnotGrid(double t_min_in, double t_max_in, int intervals_in,
                   int order_in)
    : t_min(t_min_in),
      t_max(t_max_in),
      intervals(intervals_in),
      order(order_in) {
  if (!(t_min < t_max)) {
    throw ContractError("knot grid: domain must satisfy t_min < t_max");
  }
  if (intervals < 1) {
    throw ContractError("knot grid: interval count must be >= 1");
  }
  if (order < 0) {
    throw ContractError("knot grid: order must be >= 0");
  }
  if (order >= 16) {
    throw ContractError("knot grid: order must be < 16");
  }
  const double h = (t_max - t_min) / intervals;
  knots.resize(intervals + 2 * order + 1);
  for (int i = 0; i < static_cast<int>(knots.size()); ++i) {
    knots[i] = t_min + (i - order) * h;
  }
}

double KnotGrid::clamp(double x) const {
  return std::min(std::max(x, t_min), t_max);
}

int KnotGrid::find_span(double x) const {
  int idx = static_cast<int>((x - t_min) / spacing());
  idx = std::min(std::max(idx, 0), intervals - 1);
  int span = order + idx;
  // guard against rounding at interval boundaries
  while (span > order && x < knots[span]) --span;
  while (span < order + intervals - 1 && x >= knots[span + 1]) ++span;
  return span;
}

void KnotGrid::basis_values(double x, int span, std::span<double> out) const {
  const int k = order;
  out[0] = 1.0;
  if (k == 0) return;
  double left[16];
  double right[16];
  for (int j = 1; j <= k; ++j) {
    left[j] = x - knots[span + 1 - j];
    right[j] = knots[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    out[j] = saved;
  }
}

void KnotGrid::basis_and_derivative(double x, int span, std::span<double> val,
                                    std::span<double> der) const {
  const int k = order;
  basis_values(x, span, val);
  if (k == 0) {
    der[0] = 0.0;
    return;
  }
  // Derivative from the k-1 order basis:
  // B'_{i,k} = k * (B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}))
  double low[16];
  {
    // order k-1 window: indices span-k+1 .. span
    std::span<double> lowspan(low, static_cast<size_t>(k));
    const int k1 = k - 1;
    lowspan[0] = 1.0;
    double left[16];
    double right[16];
    for (int j = 1; j <= k1; ++j) {
      left[j] = x - knots[span + 1 - j];
      right[j] = knots[span + j] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = lowspan[r] / (right[r + 1] + left[j - r]);
        lowspan[r] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      lowspan[j] = saved;
    }
  }
  for (int r = 0; r <= k; ++r) {
    const int i = span - k + r;
    double term = 0.0;
    if (r >= 1) term += low[r - 1] / (knots[i + k] - knots[i]);
    if (r <= k - 1) term -= low[r] / (knots[i + k + 1] - knots[i + 1]);
    der[r] = k * term;
  }
}

std::vector<double> bspline_basis(double x, const KnotGrid& grid) {
  std::vector<double> out(grid.basis_count(), 0.0);
  const double u = grid.clamp(x);
  const int span = grid.find_span(u);
  double window[17];
  grid.basis_values(u, span, {window, static_cast<size_t>(grid.order + 1)});
  for (int r = 0; r <= grid.order; ++r) {
    out[span - grid.order + r] = window[r];
  }
  return out;
}

double spline_eval(double x, std::span<const double> coef,
                   const KnotGrid& grid) {
  if (static_cast<int>(coef.size()) != grid.basis_count()) {
    throw DimensionError("spline_eval: expected " +
                         std::to_string(grid.basis_count()) +
                         " coefficients, got " + std::to_string(coef.size()));
  }
  const double u = grid.clamp(x);
  const int span = grid.find_span(u);
  double window[17];
  grid.basis_values(u, span, {window, static_cast<size_t>(grid.order + 1)});
  double s = 0.0;
  for (int r = 0; r <= grid.order; ++r) {
    s += coef[span - grid.order + r] * window[r];
  }
  return s;
}

double phi_eval(double x, double w_basis, double w_spline,
                std::span<const double> coef, const KnotGrid& grid) {
  return w_basis * silu_value(x) + w_spline * spline_eval(x, coef, grid);
}

// ---- KanLayer ------------------------------------------------------------

KanLayer::KanLayer(int d_in, int d_out, KnotGrid grid)
    : d_in_(d_in), d_out_(d_out), grid_(std::move(grid)) {
  if (d_in < 1 || d_out < 1) {
    throw ContractError("kan layer: widths must be positive");
  }
  const int nb = grid_.basis_count();
  coef_ = Tensor::zeros({d_in, d_out, nb}, true);
  basis_weight_ = Tensor::zeros({d_in, d_out}, true);
  spline_weight_ = Tensor::zeros({d_in, d_out}, true);
}

KanLayer KanLayer::init(int d_in, int d_out, const KnotGrid& grid,
                        uint64_t seed) {
  KanLayer layer(d_in, d_out, grid);
  Rng rng(seed);
  const int nb = grid.basis_count();
  const double coef_std = 0.1 / std::sqrt(static_cast<double>(nb));
  for (auto& v : layer.coef_.mutable_data()) v = rng.normal() * coef_std;
  const double wb_std = 1.0 / std::sqrt(static_cast<double>(d_in));
  for (auto& v : layer.basis_weight_.mutable_data()) v = rng.normal() * wb_std;
  for (auto& v : layer.spline_weight_.mutable_data()) v = 1.0;
  return layer;
}

Tensor KanLayer::forward(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != d_in_) {
    throw DimensionError("kan layer: input " + shape_str(x.shape()) +
                         " does not match width " + std::to_string(d_in_));
  }
  const int rows = static_cast<int>(x.rows());
  const int din = d_in_;
  const int dout = d_out_;
  const int nb = grid_.basis_count();
  const int w = grid_.order + 1;  // window size

  auto xn = x.node();
  auto cn = coef_.node();
  auto wbn = basis_weight_.node();
  auto wsn = spline_weight_.node();

  // SiLU features plus their derivative, for the basis-weight path.
  auto sval = std::make_shared<std::vector<double>>(
      static_cast<size_t>(rows) * din);
  auto sder = std::make_shared<std::vector<double>>(sval->size());
  for (size_t i = 0; i < sval->size(); ++i) {
    (*sval)[i] = silu_value(xn->value[i]);
    (*sder)[i] = silu_derivative(xn->value[i]);
  }

  // Flattened basis matrix (rows x din*nb) plus per-entry derivative windows.
  auto basflat = std::make_shared<std::vector<double>>(
      static_cast<size_t>(rows) * din * nb, 0.0);
  auto dwin = std::make_shared<std::vector<double>>(
      static_cast<size_t>(rows) * din * w, 0.0);
  auto spans = std::make_shared<std::vector<int>>(
      static_cast<size_t>(rows) * din);
  double vbuf[17];
  double dbuf[17];
  for (int r = 0; r < rows; ++r) {
    for (int i = 0; i < din; ++i) {
      const size_t e = static_cast<size_t>(r) * din + i;
      const double raw = xn->value[e];
      const double u = grid_.clamp(raw);
      const bool inside = raw >= grid_.t_min && raw <= grid_.t_max;
      const int span = grid_.find_span(u);
      (*spans)[e] = span;
      grid_.basis_and_derivative(u, span, {vbuf, static_cast<size_t>(w)},
                                 {dbuf, static_cast<size_t>(w)});
      double* brow = basflat->data() + e * nb;
      double* drow = dwin->data() + e * w;
      for (int m = 0; m < w; ++m) {
        brow[span - grid_.order + m] = vbuf[m];
        drow[m] = inside ? dbuf[m] : 0.0;
      }
    }
  }

  // Effective coefficients: Ceff[(i*nb+m), j] = w_s[i,j] * c[i,j,m].
  auto ceff = std::make_shared<std::vector<double>>(
      static_cast<size_t>(din) * nb * dout);
  for (int i = 0; i < din; ++i) {
    for (int j = 0; j < dout; ++j) {
      const double ws = wsn->value[static_cast<size_t>(i) * dout + j];
      const double* crow =
          cn->value.data() + (static_cast<size_t>(i) * dout + j) * nb;
      for (int m = 0; m < nb; ++m) {
        (*ceff)[(static_cast<size_t>(i) * nb + m) * dout + j] = ws * crow[m];
      }
    }
  }

  std::vector<double> out(static_cast<size_t>(rows) * dout);
  kernels::matmul(sval->data(), wbn->value.data(), out.data(), rows, din,
                  dout);
  std::vector<double> spline_out(out.size());
  kernels::matmul(basflat->data(), ceff->data(), spline_out.data(), rows,
                  din * nb, dout);
  kernels::add(out.data(), spline_out.data(), out.data(),
               static_cast<int>(out.size()));

  bool rec = ops_detail::recording({&x, &coef_, &basis_weight_,
                                    &spline_weight_});
  const int order = grid_.order;
  return ops_detail::make_op_output(
      {rows, dout}, std::move(out), rec,
      [xn, cn, wbn, wsn, sval, sder, basflat, dwin, spans, ceff, rows, din,
       dout, nb, w, order](const detail::Node& o) {
        const double* dout_grad = o.grad.data();
        // basis-weight path: out += silu(x) * w_b
        if (wbn->requires_grad) {
          std::vector<double> st(static_cast<size_t>(din) * rows);
          kernels::transpose(sval->data(), st.data(), rows, din);
          std::vector<double> gw(static_cast<size_t>(din) * dout);
          kernels::matmul(st.data(), dout_grad, gw.data(), din, rows, dout);
          ops_detail::grad_accumulate(wbn, gw);
        }
        std::vector<double> ds;  // dL/d silu(x), reused for x grads
        if (xn->requires_grad) {
          std::vector<double> wbt(static_cast<size_t>(dout) * din);
          kernels::transpose(wbn->value.data(), wbt.data(), din, dout);
          ds.resize(static_cast<size_t>(rows) * din);
          kernels::matmul(dout_grad, wbt.data(), ds.data(), rows, dout, din);
        }
        // spline path: out += basflat * ceff
        const bool need_coef = cn->requires_grad || wsn->requires_grad;
        if (need_coef) {
          std::vector<double> bt(static_cast<size_t>(din) * nb * rows);
          kernels::transpose(basflat->data(), bt.data(), rows, din * nb);
          std::vector<double> gceff(static_cast<size_t>(din) * nb * dout);
          kernels::matmul(bt.data(), dout_grad, gceff.data(), din * nb, rows,
                          dout);
          if (cn->requires_grad) cn->ensure_grad();
          if (wsn->requires_grad) wsn->ensure_grad();
          for (int i = 0; i < din; ++i) {
            for (int j = 0; j < dout; ++j) {
              const size_t edge = static_cast<size_t>(i) * dout + j;
              const double ws = wsn->value[edge];
              const double* crow = cn->value.data() + edge * nb;
              double acc_ws = 0.0;
              for (int m = 0; m < nb; ++m) {
                const double g =
                    gceff[(static_cast<size_t>(i) * nb + m) * dout + j];
                if (cn->requires_grad) cn->grad[edge * nb + m] += ws * g;
                acc_ws += crow[m] * g;
              }
              if (wsn->requires_grad) wsn->grad[edge] += acc_ws;
            }
          }
        }
        if (xn->requires_grad) {
          std::vector<double> ceff_t(static_cast<size_t>(dout) * din * nb);
          kernels::transpose(ceff->data(), ceff_t.data(), din * nb, dout);
          std::vector<double> gbas(static_cast<size_t>(rows) * din * nb);
          kernels::matmul(dout_grad, ceff_t.data(), gbas.data(), rows, dout,
                          din * nb);
          xn->ensure_grad();
          for (int r = 0; r < rows; ++r) {
            for (int i = 0; i < din; ++i) {
              const size_t e = static_cast<size_t>(r) * din + i;
              double g = ds[e] * (*sder)[e];
              const int span = (*spans)[e];
              const double* gb = gbas.data() + e * nb;
              const double* drow = dwin->data() + e * w;
              for (int m = 0; m < w; ++m) {
                g += gb[span - order + m] * drow[m];
              }
              xn->grad[e] += g;
            }
          }
        }
      });
}

std::vector<std::pair<std::string, Tensor*>> KanLayer::named_parameters(
    const std::string& prefix) {
  return {{prefix + ".coef", &coef_},
          {prefix + ".basis_weight", &basis_weight_},
          {prefix + ".spline_weight", &spline_weight_}};
}

KanStack::KanStack(std::vector<KanLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ContractError("kan stack: no layers");
  for (size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i - 1].d_out() != layers_[i].d_in()) {
      throw DimensionError(
          "kan stack: layer " + std::to_string(i - 1) + " output width " +
          std::to_string(layers_[i - 1].d_out()) + " does not chain to layer " +
          std::to_string(i) + " input width " +
          std::to_string(layers_[i].d_in()));
    }
  }
}

Tensor KanStack::forward(const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : layers_) h = layer.forward(h);
  return h;
}

}  // namespace ssdkan
