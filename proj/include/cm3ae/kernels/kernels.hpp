// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <type_traits>

// Data-parallel inner loops behind the tensor ops. Every kernel has a scalar
// reference implementation (templated, used directly for double); the float
// entry points dispatch at runtime to AVX2 or NEON variants when the CPU has
// them. Variants are equivalence-tested against the scalar reference in
// tests/test_kernels.cpp. Set CM3AE_KERNELS=scalar|avx2|neon to pin a path.
//
// GEMM conventions (row-major, ld* = row stride):
//   gemm_nn: C(mxn) = beta*C + A(mxk) * B(kxn)
//   gemm_nt: C(mxn) = beta*C + A(mxk) * B(nxk)^T
//   gemm_tn: C(mxn) = beta*C + A(kxm)^T * B(kxn)
// beta is 0 (overwrite) or 1 (accumulate).

namespace cm3ae::kernels {

enum class Isa { scalar, avx2, neon };

// Resolved once per process (env override wins, otherwise best supported).
Isa active_isa();
const char* isa_name(Isa isa);

// ---------------------------------------------------------------------------
// Scalar reference kernels
// ---------------------------------------------------------------------------
namespace scalar {

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    T* ci = c + static_cast<size_t>(i) * ldc;
    if (beta == T(0)) {
      for (int j = 0; j < n; ++j) ci[j] = T(0);
    }
    const T* ai = a + static_cast<size_t>(i) * lda;
    for (int p = 0; p < k; ++p) {
      const T aip = ai[p];
      const T* bp = b + static_cast<size_t>(p) * ldb;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<size_t>(i) * lda;
    T* ci = c + static_cast<size_t>(i) * ldc;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<size_t>(j) * ldb;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] = (beta == T(0)) ? acc : ci[j] + acc;
    }
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  if (beta == T(0)) {
    for (int i = 0; i < m; ++i) {
      T* ci = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] = T(0);
    }
  }
  for (int p = 0; p < k; ++p) {
    const T* ap = a + static_cast<size_t>(p) * lda;
    const T* bp = b + static_cast<size_t>(p) * ldb;
    for (int i = 0; i < m; ++i) {
      const T api = ap[i];
      T* ci = c + static_cast<size_t>(i) * ldc;
      for (int j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

template <typename T>
void add(size_t n, const T* x, const T* y, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

template <typename T>
void mul(size_t n, const T* x, const T* y, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

template <typename T>
void axpy(size_t n, T a, const T* x, T* y) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
void scale(size_t n, T a, const T* x, T* out) {
  for (size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

template <typename T>
T dot(size_t n, const T* x, const T* y) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <typename T>
T sum(size_t n, const T* x) {
  T acc = T(0);
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

}  // namespace scalar

// ---------------------------------------------------------------------------
// SIMD variants (float only; the wide-precision path stays on the reference
// kernels). Declared unconditionally, defined only for the matching target;
// call only after checking supported().
// ---------------------------------------------------------------------------
namespace avx2 {
bool supported();
void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc);
void add(size_t n, const float* x, const float* y, float* out);
void mul(size_t n, const float* x, const float* y, float* out);
void axpy(size_t n, float a, const float* x, float* y);
void scale(size_t n, float a, const float* x, float* out);
float dot(size_t n, const float* x, const float* y);
float sum(size_t n, const float* x);
}  // namespace avx2

namespace neon {
bool supported();
void gemm_nn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_nt(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc);
void gemm_tn(int m, int n, int k, const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc);
void add(size_t n, const float* x, const float* y, float* out);
void mul(size_t n, const float* x, const float* y, float* out);
void axpy(size_t n, float a, const float* x, float* y);
void scale(size_t n, float a, const float* x, float* out);
float dot(size_t n, const float* x, const float* y);
float sum(size_t n, const float* x);
}  // namespace neon

// ---------------------------------------------------------------------------
// Dispatched entry points
// ---------------------------------------------------------------------------

struct FloatKernels {
  void (*gemm_nn)(int, int, int, const float*, int, const float*, int, float, float*, int);
  void (*gemm_nt)(int, int, int, const float*, int, const float*, int, float, float*, int);
  void (*gemm_tn)(int, int, int, const float*, int, const float*, int, float, float*, int);
  void (*add)(size_t, const float*, const float*, float*);
  void (*mul)(size_t, const float*, const float*, float*);
  void (*axpy)(size_t, float, const float*, float*);
  void (*scale)(size_t, float, const float*, float*);
  float (*dot)(size_t, const float*, const float*);
  float (*sum)(size_t, const float*);
};

const FloatKernels& float_table();

template <typename T>
void gemm_nn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().gemm_nn(m, n, k, a, lda, b, ldb, beta, c, ldc);
  } else {
    scalar::gemm_nn(m, n, k, a, lda, b, ldb, beta, c, ldc);
  }
}

template <typename T>
void gemm_nt(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().gemm_nt(m, n, k, a, lda, b, ldb, beta, c, ldc);
  } else {
    scalar::gemm_nt(m, n, k, a, lda, b, ldb, beta, c, ldc);
  }
}

template <typename T>
void gemm_tn(int m, int n, int k, const T* a, int lda, const T* b, int ldb, T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().gemm_tn(m, n, k, a, lda, b, ldb, beta, c, ldc);
  } else {
    scalar::gemm_tn(m, n, k, a, lda, b, ldb, beta, c, ldc);
  }
}

template <typename T>
void add(size_t n, const T* x, const T* y, T* out) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().add(n, x, y, out);
  } else {
    scalar::add(n, x, y, out);
  }
}

template <typename T>
void mul(size_t n, const T* x, const T* y, T* out) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().mul(n, x, y, out);
  } else {
    scalar::mul(n, x, y, out);
  }
}

template <typename T>
void axpy(size_t n, T a, const T* x, T* y) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().axpy(n, a, x, y);
  } else {
    scalar::axpy(n, a, x, y);
  }
}

template <typename T>
void scale(size_t n, T a, const T* x, T* out) {
  if constexpr (std::is_same_v<T, float>) {
    float_table().scale(n, a, x, out);
  } else {
    scalar::scale(n, a, x, out);
  }
}

template <typename T>
T dot(size_t n, const T* x, const T* y) {
  if constexpr (std::is_same_v<T, float>) {
    return float_table().dot(n, x, y);
  } else {
    return scalar::dot(n, x, y);
  }
}

template <typename T>
T sum(size_t n, const T* x) {
  if constexpr (std::is_same_v<T, float>) {
    return float_table().sum(n, x);
  } else {
    return scalar::sum(n, x);
  }
}

}  // namespace cm3ae::kernels
