// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "cm3ae/model/params.hpp"

namespace cm3ae {

// Decoupled weight decay Adam over an explicit parameter list. Parameters
// outside the list are never touched, which is what makes the loss-term
// ablation flags checksum-stable.
template <typename T>
class AdamW {
 public:
  explicit AdamW(std::vector<Param<T>*> params, double beta1 = 0.9, double beta2 = 0.95, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Param<T>* p : params_) {
      m_.emplace_back(p->value.rows, p->value.cols);
      v_.emplace_back(p->value.rows, p->value.cols);
    }
  }

  void zero_grads() {
    for (Param<T>* p : params_) p->zero_grad();
  }

  void step(double lr, double weight_decay) {
    ++t_;
    const T bc1 = T(1) - static_cast<T>(std::pow(beta1_, static_cast<double>(t_)));
    const T bc2 = T(1) - static_cast<T>(std::pow(beta2_, static_cast<double>(t_)));
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_);
    const T one_m_b1 = T(1) - b1, one_m_b2 = T(1) - b2;
    const T lrT = static_cast<T>(lr), wdT = static_cast<T>(weight_decay), epsT = static_cast<T>(eps_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      Mat<T>& m = m_[i];
      Mat<T>& v = v_[i];
      for (size_t j = 0; j < p.value.size(); ++j) {
        const T g = p.grad.data[j];
        m.data[j] = b1 * m.data[j] + one_m_b1 * g;
        v.data[j] = b2 * v.data[j] + one_m_b2 * g * g;
        const T mhat = m.data[j] / bc1;
        const T vhat = v.data[j] / bc2;
        p.value.data[j] -= lrT * (mhat / (std::sqrt(vhat) + epsT) + wdT * p.value.data[j]);
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  const std::vector<Param<T>*>& params() const { return params_; }
  Mat<T>& moment_m(size_t i) { return m_[i]; }
  Mat<T>& moment_v(size_t i) { return v_[i]; }

 private:
  std::vector<Param<T>*> params_;
  std::vector<Mat<T>> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// Linear warmup over the leading fraction of the budget, cosine decay to zero
// afterwards. `step` is 1-based.
inline double lr_at_step(double base_lr, int64_t step, int64_t total_steps, double warmup_frac = 0.05) {
  if (total_steps <= 0) throw std::invalid_argument("lr_at_step: total_steps must be positive");
  const int64_t warmup = std::max<int64_t>(1, static_cast<int64_t>(std::llround(total_steps * warmup_frac)));
  if (step <= warmup) return base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total_steps <= warmup) return base_lr;
  const double progress = static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace cm3ae
