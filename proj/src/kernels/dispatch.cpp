// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include "cm3ae/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>

namespace cm3ae::kernels {

namespace {

Isa resolve_isa() {
  if (const char* env = std::getenv("CM3AE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2::supported()) return Isa::avx2;
    if (std::strcmp(env, "neon") == 0 && neon::supported()) return Isa::neon;
    // unknown or unsupported request falls through to auto-detection
  }
  if (avx2::supported()) return Isa::avx2;
  if (neon::supported()) return Isa::neon;
  return Isa::scalar;
}

FloatKernels make_table(Isa isa) {
  FloatKernels t{};
  switch (isa) {
    case Isa::avx2:
      t = {avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn, avx2::add, avx2::mul,
           avx2::axpy,    avx2::scale,   avx2::dot,     avx2::sum};
      break;
    case Isa::neon:
      t = {neon::gemm_nn, neon::gemm_nt, neon::gemm_tn, neon::add, neon::mul,
           neon::axpy,    neon::scale,   neon::dot,     neon::sum};
      break;
    case Isa::scalar:
      t = {scalar::gemm_nn<float>, scalar::gemm_nt<float>, scalar::gemm_tn<float>,
           scalar::add<float>,     scalar::mul<float>,     scalar::axpy<float>,
           scalar::scale<float>,   scalar::dot<float>,     scalar::sum<float>};
      break;
  }
  return t;
}

}  // namespace

Isa active_isa() {
  static const Isa isa = resolve_isa();
  return isa;
}

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
  }
  return "?";
}

const FloatKernels& float_table() {
  static const FloatKernels table = make_table(active_isa());
  return table;
}

}  // namespace cm3ae::kernels
