// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cm3ae/model/encoders.hpp"
#include "cm3ae/model/masking.hpp"
#include "cm3ae/model/model.hpp"

namespace cm3ae {

// Scatters the visible (projected) tokens into a full-length sequence: slot 0
// keeps the CLS token, every other slot holds either its visible token or a
// copy of the modality's shared mask token, and the decoder positional table
// is added to all N+1 slots.
template <typename T>
TokenSequence<T> assemble_decoder_input(nn::Graph<T>& g, const TokenSequence<T>& visible,
                                        const std::vector<int>& plan_positions, int num_patches,
                                        Param<T>* mask_token, Param<T>* pos_table) {
  if (static_cast<int>(plan_positions.size()) + 1 != visible.length()) {
    throw std::invalid_argument("assemble_decoder_input: visible length " + std::to_string(visible.length()) +
                                " != positions + CLS (" + std::to_string(plan_positions.size() + 1) + ")");
  }
  std::vector<int> slots(plan_positions.size() + 1);
  slots[0] = 0;
  for (size_t i = 0; i < plan_positions.size(); ++i) {
    const int p = plan_positions[i];
    if (p < 0 || p >= num_patches)
      throw std::invalid_argument("assemble_decoder_input: position " + std::to_string(p) + " out of range");
    slots[i + 1] = p + 1;
  }
  const nn::NodeId assembled =
      g.assemble_sequence(visible.tokens, slots, nn::param_node(g, mask_token), num_patches + 1);

  TokenSequence<T> out;
  out.tokens = g.add(assembled, nn::param_node(g, pos_table));
  out.position_ids.resize(static_cast<size_t>(num_patches) + 1);
  out.position_ids[0] = kClsPosition;
  for (int i = 0; i < num_patches; ++i) out.position_ids[static_cast<size_t>(i) + 1] = i;
  return out;
}

template <typename T>
struct DecodeResult {
  nn::NodeId predicted = -1;       // N x patch_dim pixel predictions
  nn::NodeId representation = -1;  // 1 x dim summary used by contrastive learning
};

// Transformer stack, then a per-token linear map to pixel values. The CLS slot
// is dropped from the pixel output; its pre-head vector (or the mean-pooled
// patch tokens, per config) is returned as the sequence representation.
template <typename T>
DecodeResult<T> decode_and_predict(nn::Graph<T>& g, const TokenSequence<T>& assembled, const DecoderBranch<T>& dec,
                                   bool mean_pool_representation = false) {
  if (assembled.position_ids.empty() || assembled.position_ids[0] != kClsPosition)
    throw std::invalid_argument("decode_and_predict: input has no CLS slot");
  const nn::NodeId out = nn::transformer_stack(g, assembled.tokens, dec.blocks);
  const int n = assembled.length() - 1;
  DecodeResult<T> res;
  res.representation = mean_pool_representation ? g.mean_rows(g.slice_rows(out, 1, n)) : g.slice_rows(out, 0, 1);
  res.predicted = nn::linear(g, g.slice_rows(out, 1, n), dec.head);
  return res;
}

// Total masked pixel-value count across both modalities: the 1/N_m prefactor
// shared by the two reconstruction sums.
inline int masked_value_count(const MaskPlan& plan, int patch_dim) {
  return 2 * (plan.num_patches - plan.visible_count) * patch_dim;
}

template <typename T>
Mat<T> patches_matrix(const PatchSequence& p) {
  Mat<float> m(p.num_patches, p.patch_dim);
  m.data = p.patches;
  if constexpr (std::is_same_v<T, float>) {
    return m;
  } else {
    return m.template cast<T>();
  }
}

// L_m: squared pixel error summed over the masked patches of both modalities,
// divided by the total masked pixel count N_m. Visible patches contribute
// nothing.
template <typename T>
nn::NodeId loss_masked_recon(nn::Graph<T>& g, nn::NodeId pred_rgb, nn::NodeId pred_event,
                             const PatchSequence& target_rgb, const PatchSequence& target_event,
                             const MaskPlan& plan) {
  const auto rgb_masked = plan.rgb_masked();
  const auto event_masked = plan.event_masked();
  if (rgb_masked.empty() && event_masked.empty())
    throw std::invalid_argument("loss_masked_recon: empty masked set (division by zero)");
  const int n_m = masked_value_count(plan, target_rgb.patch_dim);
  const nn::NodeId sq_rgb = g.masked_sq_err(pred_rgb, patches_matrix<T>(target_rgb), rgb_masked);
  const nn::NodeId sq_event = g.masked_sq_err(pred_event, patches_matrix<T>(target_event), event_masked);
  return g.scale_const(g.add(sq_rgb, sq_event), T(1) / T(n_m));
}

}  // namespace cm3ae
