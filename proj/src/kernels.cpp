// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0

#include "ssdkan/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace ssdkan::kernels {

namespace scalar {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  // Row-parallel: each thread owns whole output rows, so the result does not
  // depend on the thread count.
#pragma omp parallel for schedule(static) if (m >= 16 && n >= 8)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) {
        crow[j] += av * brow[j];
      }
    }
  }
}

void colsum(const double* a, double* out, int rows, int cols) {
  std::fill(out, out + cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<size_t>(r) * cols;
    for (int j = 0; j < cols; ++j) {
      out[j] += arow[j];
    }
  }
}

void add(const double* a, const double* b, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double alpha, double* out, int n) {
  for (int i = 0; i < n; ++i) out[i] = a[i] * alpha;
}

void axpy(double alpha, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rational(const double* x, double* out, int count, const double* num,
              int num_count, const double* den, int den_count) {
  for (int i = 0; i < count; ++i) {
    const double xv = x[i];
    double p = num[num_count - 1];
    for (int j = num_count - 2; j >= 0; --j) p = p * xv + num[j];
    double q = 1.0;
    if (den_count > 0) {
      double s = den[den_count - 1];
      for (int j = den_count - 2; j >= 0; --j) s = s * xv + den[j];
      s = s * xv;
      q = 1.0 + std::fabs(s);
    }
    out[i] = p / q;
  }
}

}  // namespace scalar

#ifdef SSDKAN_HAVE_AVX2_LANE
namespace avx2 {
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void colsum(const double* a, double* out, int rows, int cols);
void add(const double* a, const double* b, double* out, int n);
void mul(const double* a, const double* b, double* out, int n);
void scale(const double* a, double alpha, double* out, int n);
void axpy(double alpha, const double* x, double* y, int n);
void rational(const double* x, double* out, int count, const double* num,
              int num_count, const double* den, int den_count);
}  // namespace avx2
#endif

bool cpu_has_avx2() {
#if defined(SSDKAN_HAVE_AVX2_LANE) && (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

namespace {

Lane detect_default_lane() {
  if (const char* env = std::getenv("SSDKAN_LANE")) {
    if (std::strcmp(env, "scalar") == 0) return Lane::Scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Lane::Avx2;
  }
  return cpu_has_avx2() ? Lane::Avx2 : Lane::Scalar;
}

std::atomic<Lane> g_lane{detect_default_lane()};

}  // namespace

Lane active_lane() { return g_lane.load(std::memory_order_relaxed); }

void set_lane(Lane lane) {
  if (lane == Lane::Avx2 && !cpu_has_avx2()) {
    throw std::runtime_error("kernels: AVX2 lane requested but not supported");
  }
  g_lane.store(lane, std::memory_order_relaxed);
}

std::string_view lane_name(Lane lane) {
  return lane == Lane::Avx2 ? "avx2" : "scalar";
}

#ifdef SSDKAN_HAVE_AVX2_LANE
#define SSDKAN_DISPATCH(fn, ...)                \
  if (active_lane() == Lane::Avx2) {            \
    avx2::fn(__VA_ARGS__);                      \
  } else {                                      \
    scalar::fn(__VA_ARGS__);                    \
  }
#else
#define SSDKAN_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  SSDKAN_DISPATCH(matmul, a, b, c, m, k, n);
}

void colsum(const double* a, double* out, int rows, int cols) {
  SSDKAN_DISPATCH(colsum, a, out, rows, cols);
}

void add(const double* a, const double* b, double* out, int n) {
  SSDKAN_DISPATCH(add, a, b, out, n);
}

void mul(const double* a, const double* b, double* out, int n) {
  SSDKAN_DISPATCH(mul, a, b, out, n);
}

void scale(const double* a, double alpha, double* out, int n) {
  SSDKAN_DISPATCH(scale, a, alpha, out, n);
}

void axpy(double alpha, const double* x, double* y, int n) {
  SSDKAN_DISPATCH(axpy, alpha, x, y, n);
}

void rational(const double* x, double* out, int count, const double* num,
              int num_count, const double* den, int den_count) {
  SSDKAN_DISPATCH(rational, x, out, count, num, num_count, den, den_count);
}

#undef SSDKAN_DISPATCH

void transpose(const double* a, double* out, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) {
      out[static_cast<size_t>(c) * rows + r] = arow[c];
    }
  }
}

}  // namespace ssdkan::kernels
