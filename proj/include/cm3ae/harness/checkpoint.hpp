// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cm3ae/core/matrix.hpp"
#include "cm3ae/model/model.hpp"

namespace cm3ae {

// CMCK named-tensor container:
//   magic "CMCK" (4 bytes), version u32 = 1 (little-endian)
//   entries until EOF, each:
//     name_len u32, name bytes
//     rank u32 (always 2), dims u32[rank]
//     rows*cols IEEE-754 binary32 values, little-endian
// Entry order is the write order, so identical state produces identical
// files.
using NamedTensors = std::vector<std::pair<std::string, Mat<float>>>;

void write_cmck(const std::string& path, const NamedTensors& entries);
NamedTensors read_cmck(const std::string& path);

const Mat<float>* find_tensor(const NamedTensors& entries, const std::string& name);

// Bit-exact scalar smuggling: integers and RNG words are memcpy'd into f32
// lanes, never arithmetic-converted.
Mat<float> bits_to_tensor(const std::vector<uint32_t>& words);
std::vector<uint32_t> tensor_to_bits(const Mat<float>& t);

// Every model parameter, in registration order.
template <typename T>
NamedTensors snapshot_params(const Cm3aeModel<T>& model) {
  NamedTensors out;
  out.reserve(model.store.size());
  for (const auto& p : model.store) {
    if constexpr (std::is_same_v<T, float>) {
      out.emplace_back(p.name, p.value);
    } else {
      out.emplace_back(p.name, p.value.template cast<float>());
    }
  }
  return out;
}

// Loads parameters into the model. With an empty group filter every parameter
// must be present with a matching shape; mismatches are collected and thrown
// together. With a filter only parameters of those groups are touched (and
// must all be present).
template <typename T>
void load_params(Cm3aeModel<T>& model, const NamedTensors& entries, const std::set<ParamGroup>& only_groups = {}) {
  std::vector<std::string> problems;
  for (auto& p : model.store) {
    if (!only_groups.empty() && !only_groups.count(p.group)) continue;
    const Mat<float>* t = find_tensor(entries, p.name);
    if (!t) {
      problems.push_back("missing parameter: " + p.name);
      continue;
    }
    if (t->rows != p.value.rows || t->cols != p.value.cols) {
      problems.push_back("shape mismatch for " + p.name + ": checkpoint " + std::to_string(t->rows) + "x" +
                         std::to_string(t->cols) + ", model " + std::to_string(p.value.rows) + "x" +
                         std::to_string(p.value.cols));
      continue;
    }
  }
  if (only_groups.empty()) {
    // parameters the model does not know are equally fatal on a full load
    for (const auto& [name, tensor] : entries) {
      if (name.rfind("trainer.", 0) == 0 || name.rfind("adam.", 0) == 0 || name.rfind("config.", 0) == 0) continue;
      if (!model.store.find(name)) problems.push_back("unknown parameter in checkpoint: " + name);
    }
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint incompatible with model (" + std::to_string(problems.size()) + " problems):";
    for (const auto& s : problems) msg += "\n  " + s;
    throw std::runtime_error(msg);
  }
  for (auto& p : model.store) {
    if (!only_groups.empty() && !only_groups.count(p.group)) continue;
    const Mat<float>* t = find_tensor(entries, p.name);
    if constexpr (std::is_same_v<T, float>) {
      p.value = *t;
    } else {
      p.value = t->template cast<T>();
    }
  }
}

}  // namespace cm3ae
