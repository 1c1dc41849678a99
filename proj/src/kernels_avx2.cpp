// Copyright (C) 2026 the ssdkan authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 lane. Vector width runs across independent output elements; reductions
// stay in scalar order, and mul/add are kept separate (no fma) so results
// match the scalar lane bit for bit.

#ifdef SSDKAN_HAVE_AVX2_LANE

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace ssdkan::kernels::avx2 {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m >= 16 && n >= 8)
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<size_t>(i) * n;
    std::fill(crow, crow + n, 0.0);
    const double* arow = a + static_cast<size_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      const double* brow = b + static_cast<size_t>(p) * n;
      int j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_add_pd(cv, _mm256_mul_pd(av, _mm256_loadu_pd(brow + j)));
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void colsum(const double* a, double* out, int rows, int cols) {
  std::fill(out, out + cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    const double* arow = a + static_cast<size_t>(r) * cols;
    int j = 0;
    for (; j + 4 <= cols; j += 4) {
      __m256d ov = _mm256_loadu_pd(out + j);
      ov = _mm256_add_pd(ov, _mm256_loadu_pd(arow + j));
      _mm256_storeu_pd(out + j, ov);
    }
    for (; j < cols; ++j) out[j] += arow[j];
  }
}

void add(const double* a, const double* b, double* out, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(const double* a, const double* b, double* out, int n) {
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(const double* a, double alpha, double* out, int n) {
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), av));
  }
  for (; i < n; ++i) out[i] = a[i] * alpha;
}

void axpy(double alpha, const double* x, double* y, int n) {
  const __m256d av = _mm256_set1_pd(alpha);
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_add_pd(yv, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void rational(const double* x, double* out, int count, const double* num,
              int num_count, const double* den, int den_count) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d signmask = _mm256_set1_pd(-0.0);
  int i = 0;
  for (; i + 4 <= count; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    __m256d p = _mm256_set1_pd(num[num_count - 1]);
    for (int j = num_count - 2; j >= 0; --j) {
      p = _mm256_add_pd(_mm256_mul_pd(p, xv), _mm256_set1_pd(num[j]));
    }
    __m256d q = one;
    if (den_count > 0) {
      __m256d s = _mm256_set1_pd(den[den_count - 1]);
      for (int j = den_count - 2; j >= 0; --j) {
        s = _mm256_add_pd(_mm256_mul_pd(s, xv), _mm256_set1_pd(den[j]));
      }
      s = _mm256_mul_pd(s, xv);
      q = _mm256_add_pd(one, _mm256_andnot_pd(signmask, s));
    }
    _mm256_storeu_pd(out + i, _mm256_div_pd(p, q));
  }
  for (; i < count; ++i) {
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

}  // namespace ssdkan::kernels::avx2

#endif  // SSDKAN_HAVE_AVX2_LANE
