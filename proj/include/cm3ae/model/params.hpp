// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cm3ae/core/matrix.hpp"
#include "cm3ae/core/rng.hpp"

namespace cm3ae {

// Parameter groups, used for flag gating (which groups the optimizer touches)
// and for partial checkpoint transfer.
enum class ParamGroup {
  rgb_encoder,
  event_encoder,
  voxel_encoder,
  rgb_decoder,
  event_decoder,
  fusion_decoder,
  projection,       // per-modality encoder->decoder projections
  vox_projection,   // voxel-token projection feeding fusion and the voxel representation
  fusion,           // the transferable fusion transformer block
  fusion_mask,      // mask token of the fused reconstruction branches
  contrastive,      // learnable logit scale
};

inline const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::rgb_encoder: return "rgb_encoder";
    case ParamGroup::event_encoder: return "event_encoder";
    case ParamGroup::voxel_encoder: return "voxel_encoder";
    case ParamGroup::rgb_decoder: return "rgb_decoder";
    case ParamGroup::event_decoder: return "event_decoder";
    case ParamGroup::fusion_decoder: return "fusion_decoder";
    case ParamGroup::projection: return "projection";
    case ParamGroup::vox_projection: return "vox_projection";
    case ParamGroup::fusion: return "fusion";
    case ParamGroup::fusion_mask: return "fusion_mask";
    case ParamGroup::contrastive: return "contrastive";
  }
  return "?";
}

template <typename T>
struct Param {
  std::string name;
  ParamGroup group;
  Mat<T> value;
  Mat<T> grad;

  void zero_grad() { grad.zero(); }
};

enum class Init { zeros, ones, trunc_normal };

// Owns every learnable tensor of the model, in registration order. std::deque
// keeps Param addresses stable so submodules can hold plain pointers.
template <typename T>
class ParamStore {
 public:
  Param<T>* add(std::string name, ParamGroup group, int rows, int cols, Init init, Rng& rng,
                double sigma = 0.02) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
    Param<T> p;
    p.name = name;
    p.group = group;
    p.value = Mat<T>(rows, cols);
    p.grad = Mat<T>(rows, cols);
    switch (init) {
      case Init::zeros:
        break;
      case Init::ones:
        p.value.fill(T(1));
        break;
      case Init::trunc_normal:
        // draws are made in float precision regardless of T so that a double
        // instantiation of the model matches the float one bit-for-bit
        for (auto& v : p.value.data) v = static_cast<T>(static_cast<float>(rng.trunc_normal(sigma)));
        break;
    }
    params_.push_back(std::move(p));
    index_[params_.back().name] = params_.size() - 1;
    return &params_.back();
  }

  Param<T>* add_scalar(std::string name, ParamGroup group, T value) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter name: " + name);
    Param<T> p;
    p.name = std::move(name);
    p.group = group;
    p.value = Mat<T>::scalar(value);
    p.grad = Mat<T>(1, 1);
    params_.push_back(std::move(p));
    index_[params_.back().name] = params_.size() - 1;
    return &params_.back();
  }

  Param<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Param<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  size_t size() const { return params_.size(); }
  Param<T>& operator[](size_t i) { return params_[i]; }
  const Param<T>& operator[](size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads() {
    for (auto& p : params_) p.zero_grad();
  }

  size_t scalar_count() const {
    size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  std::deque<Param<T>> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace cm3ae
