// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "cm3ae/model/masking.hpp"
#include "cm3ae/model/model.hpp"
#include "cm3ae/model/voxel.hpp"
#include "cm3ae/nn/blocks.hpp"
#include "cm3ae/nn/graph.hpp"

namespace cm3ae {

inline constexpr int kClsPosition = -1;          // position_id sentinel of the CLS slot
inline constexpr int kVoxelClsPosition = -2;     // CLS of the voxel token sequence

// Graph-bound token sequence: a (length x dim) node plus the original grid
// index of every token.
template <typename T>
struct TokenSequence {
  nn::NodeId tokens = -1;
  std::vector<int> position_ids;

  int length() const { return static_cast<int>(position_ids.size()); }
};

template <typename T>
nn::NodeId patches_constant(nn::Graph<T>& g, const PatchSequence& patches) {
  Mat<float> m(patches.num_patches, patches.patch_dim);
  m.data = patches.patches;
  if constexpr (std::is_same_v<T, float>) {
    return g.constant(std::move(m));
  } else {
    return g.constant(m.template cast<T>());
  }
}

// One linear map per visible patch (the stride-16 convolution collapses to
// exactly this on flattened patches), CLS prepended, positional entries for
// the CLS slot and the visible positions added.
template <typename T>
TokenSequence<T> embed_visible_patches(nn::Graph<T>& g, const PatchSequence& patches,
                                       const std::vector<int>& visible_idx, const ImageBranch<T>& branch) {
  for (int i : visible_idx) {
    if (i < 0 || i >= patches.num_patches)
      throw std::invalid_argument("embed_visible_patches: index " + std::to_string(i) + " out of range");
  }
  const nn::NodeId all = patches_constant(g, patches);
  const nn::NodeId vis = g.gather_rows(all, visible_idx);
  const nn::NodeId emb = nn::linear(g, vis, branch.embed);
  const nn::NodeId cls = nn::param_node(g, branch.cls);
  const std::vector<nn::NodeId> parts = {cls, emb};
  const nn::NodeId seq = g.concat_rows(parts);

  std::vector<int> pos_rows(visible_idx.size() + 1);
  pos_rows[0] = 0;  // CLS positional entry
  for (size_t i = 0; i < visible_idx.size(); ++i) pos_rows[i + 1] = visible_idx[i] + 1;
  const nn::NodeId pos = g.gather_rows(nn::param_node(g, branch.pos), pos_rows);

  TokenSequence<T> out;
  out.tokens = g.add(seq, pos);
  out.position_ids.resize(visible_idx.size() + 1);
  out.position_ids[0] = kClsPosition;
  std::copy(visible_idx.begin(), visible_idx.end(), out.position_ids.begin() + 1);
  return out;
}

// Pre-norm transformer stack; depth 0 is the identity.
template <typename T>
TokenSequence<T> encode_modality(nn::Graph<T>& g, const TokenSequence<T>& tokens,
                                 const std::vector<nn::BlockParams<T>>& blocks, int capture_layer = -1,
                                 Mat<T>* attn_capture = nullptr) {
  if (!blocks.empty() && g.val(tokens.tokens).cols != blocks.front().dim)
    throw std::invalid_argument("encode_modality: token dim does not match block dim");
  TokenSequence<T> out = tokens;
  out.tokens = nn::transformer_stack(g, tokens.tokens, blocks, capture_layer, attn_capture);
  return out;
}

// Per-token linear projection to the decoder width.
template <typename T>
TokenSequence<T> project_tokens(nn::Graph<T>& g, const TokenSequence<T>& tokens, const nn::LinearParams<T>& proj) {
  TokenSequence<T> out = tokens;
  out.tokens = nn::linear(g, tokens.tokens, proj);
  return out;
}

// Sorts records by (t, y, x), slices them into `groups` contiguous groups,
// concatenates each group into one wide vector, and embeds: linear map to the
// encoder width, CLS prepended, voxel positional table added.
template <typename T>
TokenSequence<T> tokenize_voxels(nn::Graph<T>& g, const VoxelSet& voxels, int groups, const VoxelBranch<T>& branch) {
  const int v = voxels.count();
  if (groups <= 0 || v % groups != 0) {
    throw std::invalid_argument("tokenize_voxels: voxel count " + std::to_string(v) +
                                " not divisible by group count " + std::to_string(groups));
  }
  const int w = voxels.record_width();
  const int per_group = v / groups;

  std::vector<int> order(static_cast<size_t>(v));
  for (int i = 0; i < v; ++i) order[static_cast<size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return voxel_record_less(voxels.records.row(a), voxels.records.row(b), w);
  });

  Mat<float> grouped(groups, per_group * w);
  for (int gi = 0; gi < groups; ++gi) {
    float* dst = grouped.row(gi);
    for (int k = 0; k < per_group; ++k) {
      std::copy_n(voxels.records.row(order[static_cast<size_t>(gi * per_group + k)]), w,
                  dst + static_cast<size_t>(k) * w);
    }
  }

  nn::NodeId grouped_node;
  if constexpr (std::is_same_v<T, float>) {
    grouped_node = g.constant(std::move(grouped));
  } else {
    grouped_node = g.constant(grouped.template cast<T>());
  }
  const nn::NodeId emb = nn::linear(g, grouped_node, branch.embed);
  const nn::NodeId cls = nn::param_node(g, branch.cls);
  const std::vector<nn::NodeId> parts = {cls, emb};
  const nn::NodeId seq = g.concat_rows(parts);

  TokenSequence<T> out;
  out.tokens = g.add(seq, nn::param_node(g, branch.pos));
  out.position_ids.resize(static_cast<size_t>(groups) + 1);
  out.position_ids[0] = kVoxelClsPosition;
  for (int i = 0; i < groups; ++i) out.position_ids[static_cast<size_t>(i) + 1] = i;
  return out;
}

template <typename T>
TokenSequence<T> encode_voxels(nn::Graph<T>& g, const TokenSequence<T>& tokens, const VoxelBranch<T>& branch,
                               int capture_layer = -1, Mat<T>* attn_capture = nullptr) {
  return encode_modality(g, tokens, branch.blocks, capture_layer, attn_capture);
}

}  // namespace cm3ae
