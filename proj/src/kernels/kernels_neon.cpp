// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
//
// NEON float kernels (aarch64). Mirrors the AVX2 set at 4-lane width.

#include "cm3ae/kernels/kernels.hpp"

#if defined(__ARM_NEON) || defined(__aarch64__)

#include <arm_neon.h>

namespace cm3ae::kernels::neon {

bool supported() { return true; }

namespace {
inline float hsum128(float32x4_t v) {
#if defined(__aarch64__)
  return vaddvq_f32(v);
#else
  float32x2_t lo = vadd_f32(vget_low_f32(v), vget_high_f32(v));
  lo = vpadd_f32(lo, lo);
  return vget_lane_f32(lo, 0);
#endif
}
}  // namespace

void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  const int n4 = n & ~3;
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<size_t>(i) * ldc;
    if (beta == 0.0f) {
      for (int j = 0; j < n; ++j) ci[j] = 0.0f;
    }
    const float* ai = a + static_cast<size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const float32x4_t av = vdupq_n_f32(ai[p]);
      const float* bp = b + static_cast<size_t>(p) * ldb;
      int j = 0;
      for (; j < n4; j += 4) {
        vst1q_f32(ci + j, vmlaq_f32(vld1q_f32(ci + j), av, vld1q_f32(bp + j)));
      }
      for (; j < n; ++j) ci[j] += ai[p] * bp[j];
    }
  }
}

void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  const int k4 = k & ~3;
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * lda;
    float* ci = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<size_t>(j) * ldb;
      float32x4_t acc = vdupq_n_f32(0.0f);
      int p = 0;
      for (; p < k4; p += 4) acc = vmlaq_f32(acc, vld1q_f32(ai + p), vld1q_f32(bj + p));
      float s = hsum128(acc);
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
  const int n4 = n & ~3;
  for (int p = 0; p < k; ++p) {
    const float* ap = a + static_cast<size_t>(p) * lda;
    const float* bp = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const float32x4_t av = vdupq_n_f32(ap[i]);
      float* ci = c + static_cast<size_t>(i) * ldc;
      int j = 0;
      for (; j < n4; j += 4) {
        vst1q_f32(ci + j, vmlaq_f32(vld1q_f32(ci + j), av, vld1q_f32(bp + j)));
      }
      for (; j < n; ++j) ci[j] += ap[i] * bp[j];
    }
  }
}

void add(size_t n, const float* x, const float* y, float* out) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vaddq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul(size_t n, const float* x, const float* y, float* out) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(vld1q_f32(x + i), vld1q_f32(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void axpy(size_t n, float a, const float* x, float* y) {
  const float32x4_t av = vdupq_n_f32(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(y + i, vmlaq_f32(vld1q_f32(y + i), av, vld1q_f32(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale(size_t n, float a, const float* x, float* out) {
  const float32x4_t av = vdupq_n_f32(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) vst1q_f32(out + i, vmulq_f32(av, vld1q_f32(x + i)));
  for (; i < n; ++i) out[i] = a * x[i];
}

float dot(size_t n, const float* x, const float* y) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = vmlaq_f32(acc, vld1q_f32(x + i), vld1q_f32(y + i));
  float s = hsum128(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

float sum(size_t n, const float* x) {
  float32x4_t acc = vdupq_n_f32(0.0f);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = vaddq_f32(acc, vld1q_f32(x + i));
  float s = hsum128(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

}  // namespace cm3ae::kernels::neon

#else

namespace cm3ae::kernels::neon {
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
}  // namespace cm3ae::kernels::neon

#endif
