// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA float kernels. This translation unit is compiled for a baseline
// target; every SIMD function carries its own target attribute, and callers
// must check supported() first.

#include "cm3ae/kernels/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

#if defined(__GNUC__) && !defined(__clang__)
#pragma GCC target("avx2,fma")
#elif defined(__clang__)
#pragma clang attribute push(__attribute__((target("avx2,fma"))), apply_to = function)
#endif

namespace cm3ae::kernels::avx2 {

bool supported() {
#if defined(__GNUC__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

inline float hsum256(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  const int n8 = n & ~7;
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<size_t>(i) * ldc;
    if (beta == 0.0f) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
    const float* ai = a + static_cast<size_t>(i) * lda;
    int p = 0;
    // two rows of B per pass keeps the FMA chain busy
    for (; p + 1 < k; p += 2) {
      const __m256 a0 = _mm256_set1_ps(ai[p]);
      const __m256 a1 = _mm256_set1_ps(ai[p + 1]);
      const float* b0 = b + static_cast<size_t>(p) * ldb;
      const float* b1 = b0 + ldb;
      int j = 0;
      for (; j < n8; j += 8) {
        __m256 acc = _mm256_loadu_ps(ci + j);
        acc = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), acc);
        acc = _mm256_fmadd_ps(a1, _mm256_loadu_ps(b1 + j), acc);
        _mm256_storeu_ps(ci + j, acc);
      }
      for (; j < n; ++j) ci[j] += ai[p] * b0[j] + ai[p + 1] * b1[j];
    }
    for (; p < k; ++p) {
      const __m256 a0 = _mm256_set1_ps(ai[p]);
      const float* b0 = b + static_cast<size_t>(p) * ldb;
      int j = 0;
      for (; j < n8; j += 8) {
        __m256 acc = _mm256_loadu_ps(ci + j);
        acc = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), acc);
        _mm256_storeu_ps(ci + j, acc);
      }
      for (; j < n; ++j) ci[j] += ai[p] * b0[j];
    }
  }
}

void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  const int k8 = k & ~7;
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * lda;
    float* ci = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<size_t>(j) * ldb;
      __m256 acc = _mm256_setzero_ps();
      int p = 0;
      for (; p < k8; p += 8) {
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(ai + p), _mm256_loadu_ps(bj + p), acc);
      }
      float s = hsum256(acc);
      for (; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = (beta == 0.0f) ? s : ci[j] + s;
    }
  }
}

void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  if (beta == 0.0f) {
    for (int i = 0; i < m; ++i) {
      float* ci = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
  }
  const int n8 = n & ~7;
  for (int p = 0; p < k; ++p) {
    const float* ap = a + static_cast<size_t>(p) * lda;
    const float* bp = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const __m256 av = _mm256_set1_ps(ap[i]);
      float* ci = c + static_cast<size_t>(i) * ldc;
      int j = 0;
      for (; j < n8; j += 8) {
        _mm256_storeu_ps(ci + j, _mm256_fmadd_ps(av, _mm256_loadu_ps(bp + j), _mm256_loadu_ps(ci + j)));
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

void add(size_t n, const float* x, const float* y, float* out) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(size_t n, const float* x, const float* y, float* out) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void axpy(size_t n, float a, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale(size_t n, float a, const float* x, float* out) {
  const __m256 av = _mm256_set1_ps(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i)));
  }
  for (; i < n; ++i) out[i] = a * x[i];
}

float dot(size_t n, const float* x, const float* y) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
  }
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

float sum(size_t n, const float* x) {
  __m256 acc = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
  float s = hsum256(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace cm3ae::kernels::avx2

#if defined(__clang__)
#pragma clang attribute pop
#endif

#else  // non-x86: stubs, never selected

namespace cm3ae::kernels::avx2 {
bool supported() { return false; }
void gemm_nn(int, int, int, const float*, int, const float*, int, float, float*, int) {}
void gemm_nt(int, int, int, const float*, int, const float*, int, float, float*, int) {}
void gemm_tn(int, int, int, const float*, int, const float*, int, float, float*, int) {}
void add(size_t, const float*, const float*, float*) {}
void mul(size_t, const float*, const float*, float*) {}
void axpy(size_t, float, const float*, float*) {}
void scale(size_t, float, const float*, float*) {}
float dot(size_t, const float*, const float*) { return 0.0f; }
float sum(size_t, const float*) { return 0.0f; }
}  // namespace cm3ae::kernels::avx2

#endif
