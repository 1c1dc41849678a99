// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels plus an AVX2 lane selected at runtime. Every SIMD
// variant keeps the scalar reduction order (vectorization runs across
// independent outputs, never across a reduction), so the two lanes produce
// bitwise-identical results. The equivalence tests assert exactly that.

#pragma once

#include <cstddef>
#include <string_view>

namespace ssdkan::kernels {

enum class Lane { Scalar, Avx2 };

bool cpu_has_avx2();
Lane active_lane();
// Test hook. Requesting Avx2 on a CPU without it throws std::runtime_error.
void set_lane(Lane lane);
std::string_view lane_name(Lane lane);

// c[m x n] = a[m x k] * b[k x n], all row-major. For every output element the
// k products are accumulated in ascending k order on both lanes.
void matmul(const double* a, const double* b, double* c, int m, int k, int n);

// out[j] = sum over rows of a[r][j]; rows accumulated in ascending order.
void colsum(const double* a, double* out, int rows, int cols);

void add(const double* a, const double* b, double* out, int n);
void mul(const double* a, const double* b, double* out, int n);
void scale(const double* a, double alpha, double* out, int n);
// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, int n);

// Safe rational function, evaluated elementwise:
//   P(x) = num[0] + num[1] x + ... + num[m] x^m        (Horner)
//   Q(x) = 1 + |den[0] x + den[1] x^2 + ... + den[n-1] x^n|
//   out  = P(x) / Q(x)
// Q >= 1 for any real x, so the result is finite for finite inputs.
void rational(const double* x, double* out, int count, const double* num,
              int num_count, const double* den, int den_count);

// Plain permutation, no arithmetic: out[c * rows + r] = a[r * cols + c].
void transpose(const double* a, double* out, int rows, int cols);

}  // namespace ssdkan::kernels
