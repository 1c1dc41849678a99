// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Kolmogorov-Arnold layers with per-edge B-spline activations. Each edge
// (i, j) carries phi(x) = w_b * SiLU(x) + w_s * sum_m c_m B_m(x) on a uniform
// knot grid shared by the whole layer; output j sums phi over the inputs.

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ssdkan/tensor.hpp"

namespace ssdkan {

// Uniform knot grid extended `order` knots past each end of the domain.
// Inputs are clamped to [t_min, t_max] before basis evaluation; the basis
// derivative w.r.t. x is zero outside the domain.
struct KnotGrid {
  KnotGrid(double t_min, double t_max, int intervals, int order);

  double t_min;
  double t_max;
  int intervals;  // G
  int order;      // k, polynomial degree
  std::vector<double> knots;  // length G + 2k + 1

  int basis_count() const { return intervals + order; }
  double spacing() const { return (t_max - t_min) / intervals; }

  double clamp(double x) const;
  // Span index j with knots[j] <= x < knots[j+1], j in [order,
  // order+intervals-1]; x must already be clamped.
  int find_span(double x) const;
  // Cox-de Boor: the order+1 basis values that are nonzero at x; out[r] is
  // basis function span-order+r.
  void basis_values(double x, int span, std::span<double> out) const;
  // Values and d/dx for the same window.
  void basis_and_derivative(double x, int span, std::span<double> val,
                            std::span<double> der) const;
};

// All basis values at x (length basis_count), x clamped to the domain.
std::vector<double> bspline_basis(double x, const KnotGrid& grid);

// sum_m c[m] * B_m(x); coefficient count must equal basis_count.
double spline_eval(double x, std::span<const double> coef,
                   const KnotGrid& grid);

// w_basis * SiLU(x) + w_spline * spline(x). The SiLU path sees the raw x;
// only the spline path clamps.
double phi_eval(double x, double w_basis, double w_spline,
                std::span<const double> coef, const KnotGrid& grid);

class KanLayer {
 public:
  KanLayer(int d_in, int d_out, KnotGrid grid);

  // c ~ N(0, 0.1/sqrt(G+k)), w_b ~ N(0, 1/sqrt(d_in)), w_s = 1.
  static KanLayer init(int d_in, int d_out, const KnotGrid& grid,
                       uint64_t seed);

  // x is rows x d_in; returns rows x d_out. Differentiable w.r.t. x and all
  // three parameter tensors.
  Tensor forward(const Tensor& x) const;

  int d_in() const { return d_in_; }
  int d_out() const { return d_out_; }
  const KnotGrid& grid() const { return grid_; }

  Tensor& coef() { return coef_; }                    // d_in x d_out x (G+k)
  Tensor& basis_weight() { return basis_weight_; }    // d_in x d_out
  Tensor& spline_weight() { return spline_weight_; }  // d_in x d_out
  const Tensor& coef() const { return coef_; }
  const Tensor& basis_weight() const { return basis_weight_; }
  const Tensor& spline_weight() const { return spline_weight_; }

  std::vector<std::pair<std::string, Tensor*>> named_parameters(
      const std::string& prefix);

 private:
  int d_in_;
  int d_out_;
  KnotGrid grid_;
  Tensor coef_;
  Tensor basis_weight_;
  Tensor spline_weight_;
};

// Composition of KAN layers; width chaining is validated at construction.
class KanStack {
 public:
  explicit KanStack(std::vector<KanLayer> layers);
  Tensor forward(const Tensor& x) const;
  const std::vector<KanLayer>& layers() const { return layers_; }
  std::vector<KanLayer>& layers() { return layers_; }

 private:
  std::vector<KanLayer> layers_;
};

}  // namespace ssdkan
