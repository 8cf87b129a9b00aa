// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "cm3ae/model/decoders.hpp"
#include "cm3ae/model/encoders.hpp"
#include "cm3ae/model/model.hpp"

namespace cm3ae {

enum class Provenance : uint8_t { rgb, event, voxel };

// A fused token sequence for one branch (RGB+Event or RGB+Event+Voxel), with
// per-token provenance so RGB tokens can be recovered after fusion.
template <typename T>
struct FusedTokens {
  TokenSequence<T> seq;
  std::vector<Provenance> tags;
  int rgb_len = 0;  // leading tokens (CLS + visible RGB)
};

// The tokens of the projected Event sequence whose positions lie in
// plan.shared, ascending. CLS is excluded. Throws when a shared position is
// missing from the sequence, and enforces the anti-leakage guarantee: every
// shared position must be RGB-visible.
template <typename T>
TokenSequence<T> select_shared_event_tokens(nn::Graph<T>& g, const TokenSequence<T>& event_tokens,
                                            const MaskPlan& plan) {
  if (!std::includes(plan.rgb_visible.begin(), plan.rgb_visible.end(), plan.shared.begin(), plan.shared.end())) {
    throw std::logic_error("anti-leakage violation: shared positions not a subset of rgb_visible");
  }
  std::vector<int> rows;
  rows.reserve(plan.shared.size());
  for (int p : plan.shared) {
    auto it = std::find(event_tokens.position_ids.begin(), event_tokens.position_ids.end(), p);
    if (it == event_tokens.position_ids.end()) {
      throw std::logic_error("select_shared_event_tokens: shared position " + std::to_string(p) +
                             " missing from event sequence");
    }
    rows.push_back(static_cast<int>(it - event_tokens.position_ids.begin()));
  }
  TokenSequence<T> out;
  out.tokens = g.gather_rows(event_tokens.tokens, rows);
  out.position_ids = plan.shared;
  return out;
}

// Sequence-axis concatenation (RGB first, then shared Event tokens, then the
// voxel tokens when present) through the single fusion transformer block.
template <typename T>
FusedTokens<T> fuse_tokens(nn::Graph<T>& g, const TokenSequence<T>& rgb, const TokenSequence<T>& event_shared,
                           const TokenSequence<T>* voxel, const nn::BlockParams<T>& fusion_block) {
  const int dim = fusion_block.dim;
  if (g.val(rgb.tokens).cols != dim || g.val(event_shared.tokens).cols != dim ||
      (voxel && g.val(voxel->tokens).cols != dim)) {
    throw std::invalid_argument("fuse_tokens: all inputs must be at the fusion block width");
  }
  std::vector<nn::NodeId> parts = {rgb.tokens, event_shared.tokens};
  if (voxel) parts.push_back(voxel->tokens);

  FusedTokens<T> out;
  out.rgb_len = rgb.length();
  out.seq.tokens = nn::transformer_block(g, g.concat_rows(parts), fusion_block);
  out.seq.position_ids = rgb.position_ids;
  out.seq.position_ids.insert(out.seq.position_ids.end(), event_shared.position_ids.begin(),
                              event_shared.position_ids.end());
  out.tags.assign(rgb.position_ids.size(), Provenance::rgb);
  out.tags.insert(out.tags.end(), event_shared.position_ids.size(), Provenance::event);
  if (voxel) {
    out.seq.position_ids.insert(out.seq.position_ids.end(), voxel->position_ids.begin(), voxel->position_ids.end());
    out.tags.insert(out.tags.end(), voxel->position_ids.size(), Provenance::voxel);
  }
  return out;
}

// Keeps only the rgb-tagged fusion outputs (CLS included), re-assembles the
// full-length decoder input with the fusion branch's own mask token, and
// decodes to RGB pixel predictions.
template <typename T>
DecodeResult<T> reconstruct_from_fused(nn::Graph<T>& g, const FusedTokens<T>& fused, const MaskPlan& plan,
                                       const Cm3aeModel<T>& model) {
  if (fused.tags.size() != fused.seq.position_ids.size() || fused.rgb_len <= 0)
    throw std::logic_error("reconstruct_from_fused: provenance missing");
  for (int i = 0; i < fused.rgb_len; ++i) {
    if (fused.tags[static_cast<size_t>(i)] != Provenance::rgb)
      throw std::logic_error("reconstruct_from_fused: leading tokens are not rgb-tagged");
  }
  TokenSequence<T> kept;
  kept.tokens = g.slice_rows(fused.seq.tokens, 0, fused.rgb_len);
  kept.position_ids.assign(fused.seq.position_ids.begin(), fused.seq.position_ids.begin() + fused.rgb_len);

  const DecoderBranch<T>& dec = model.fusion_decoder();
  const TokenSequence<T> assembled =
      assemble_decoder_input(g, kept, plan.rgb_visible, plan.num_patches, model.fusion_mask_token, dec.pos);
  return decode_and_predict(g, assembled, dec, model.config.mean_pool_representation);
}

// L_f: squared error of both fused reconstructions against the original RGB
// pixels, summed over the RGB-masked patches only, divided by the same N_m
// as the dual-branch reconstruction loss (the total masked pixel count over
// both modalities; the prefactor is defined once).
template <typename T>
nn::NodeId loss_fusion(nn::Graph<T>& g, nn::NodeId pred_re, nn::NodeId pred_rev, const PatchSequence& target_rgb,
                       const MaskPlan& plan) {
  const auto rgb_masked = plan.rgb_masked();
  if (rgb_masked.empty()) throw std::invalid_argument("loss_fusion: empty masked set (division by zero)");
  const int n_m = masked_value_count(plan, target_rgb.patch_dim);
  const nn::NodeId sq_re = g.masked_sq_err(pred_re, patches_matrix<T>(target_rgb), rgb_masked);
  const nn::NodeId sq_rev = g.masked_sq_err(pred_rev, patches_matrix<T>(target_rgb), rgb_masked);
  return g.scale_const(g.add(sq_re, sq_rev), T(1) / T(n_m));
}

}  // namespace cm3ae
