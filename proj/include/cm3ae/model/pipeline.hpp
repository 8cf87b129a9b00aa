// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "cm3ae/data/sample.hpp"
#include "cm3ae/model/decoders.hpp"
#include "cm3ae/model/encoders.hpp"
#include "cm3ae/model/masking.hpp"
#include "cm3ae/model/mcl.hpp"
#include "cm3ae/model/mfrm.hpp"
#include "cm3ae/model/model.hpp"

namespace cm3ae {

template <typename T>
struct BatchForward {
  nn::NodeId total = -1;
  nn::NodeId loss_m = -1;
  nn::NodeId loss_f = -1;   // -1 when MFRM disabled
  nn::NodeId loss_cl = -1;  // -1 when MCL disabled
  T ls = T(0);              // effective contrastive scale (0 when MCL disabled)
  std::vector<T> per_sample_lm;
  std::vector<T> per_sample_lf;
};

// Full pre-training forward pass over a batch: dual-branch masked
// reconstruction, the two fused reconstruction branches, and the four-way
// contrastive objective, gated by the two flags. plans[i] pairs with
// batch[i].
template <typename T>
BatchForward<T> forward_batch(nn::Graph<T>& g, const Cm3aeModel<T>& model, std::span<const SamplePair> batch,
                              std::span<const MaskPlan> plans, bool enable_mfrm, bool enable_mcl) {
  if (batch.empty()) throw std::invalid_argument("forward_batch: empty batch");
  if (batch.size() != plans.size()) throw std::invalid_argument("forward_batch: batch/plan count mismatch");
  const auto& cfg = model.config;
  const bool need_voxels = enable_mfrm || enable_mcl;
  const bool pool = cfg.mean_pool_representation;

  BatchForward<T> out;
  std::vector<nn::NodeId> lm_terms, lf_terms;
  std::vector<nn::NodeId> reps_rgb, reps_event, reps_vox;

  for (size_t i = 0; i < batch.size(); ++i) {
    const SamplePair& sample = batch[i];
    const MaskPlan& plan = plans[i];
    if (plan.num_patches != cfg.num_patches())
      throw std::invalid_argument("forward_batch: mask plan patch count does not match the model config");
    if (need_voxels && sample.voxels.empty())
      throw std::invalid_argument("forward_batch: sample has no voxels but MFRM/MCL is enabled");

    const PatchSequence rgb_patches = patchify(sample.rgb, cfg.patch_size);
    const PatchSequence event_patches = patchify(sample.event, cfg.patch_size);

    // dual-branch masked autoencoding
    const TokenSequence<T> rgb_enc = encode_modality(
        g, embed_visible_patches(g, rgb_patches, plan.rgb_visible, model.rgb), model.rgb.blocks);
    const TokenSequence<T> rgb_proj = project_tokens(g, rgb_enc, model.rgb.proj);
    const TokenSequence<T> event_enc = encode_modality(
        g, embed_visible_patches(g, event_patches, plan.event_visible, model.event), model.event.blocks);
    const TokenSequence<T> event_proj = project_tokens(g, event_enc, model.event.proj);

    const TokenSequence<T> rgb_dec_in =
        assemble_decoder_input(g, rgb_proj, plan.rgb_visible, plan.num_patches, model.rgb_dec.mask_token,
                               model.rgb_dec.pos);
    const DecodeResult<T> rgb_out = decode_and_predict(g, rgb_dec_in, model.rgb_dec, pool);
    const TokenSequence<T> event_dec_in =
        assemble_decoder_input(g, event_proj, plan.event_visible, plan.num_patches, model.event_dec.mask_token,
                               model.event_dec.pos);
    const DecodeResult<T> event_out = decode_and_predict(g, event_dec_in, model.event_dec, pool);

    const nn::NodeId lm =
        loss_masked_recon(g, rgb_out.predicted, event_out.predicted, rgb_patches, event_patches, plan);
    lm_terms.push_back(lm);
    out.per_sample_lm.push_back(g.scalar(lm));

    // voxel branch feeds both MFRM and the RGB-Voxel contrastive pair
    TokenSequence<T> vox_proj_tokens;
    if (need_voxels) {
      const TokenSequence<T> vox_tokens = tokenize_voxels(g, sample.voxels, cfg.voxel_groups(), model.voxel);
      const TokenSequence<T> vox_enc = encode_voxels(g, vox_tokens, model.voxel);
      vox_proj_tokens = project_tokens(g, vox_enc, model.vox_proj);
      if (enable_mcl) {
        reps_vox.push_back(extract_representation(g, vox_proj_tokens, pool));
      }
    }

    if (enable_mfrm) {
      const TokenSequence<T> event_shared = select_shared_event_tokens(g, event_proj, plan);
      const FusedTokens<T> fused_re = fuse_tokens<T>(g, rgb_proj, event_shared, nullptr, model.fusion_block);
      const DecodeResult<T> re_out = reconstruct_from_fused(g, fused_re, plan, model);
      const FusedTokens<T> fused_rev =
          fuse_tokens<T>(g, rgb_proj, event_shared, &vox_proj_tokens, model.fusion_block);
      const DecodeResult<T> rev_out = reconstruct_from_fused(g, fused_rev, plan, model);
      const nn::NodeId lf = loss_fusion(g, re_out.predicted, rev_out.predicted, rgb_patches, plan);
      lf_terms.push_back(lf);
      out.per_sample_lf.push_back(g.scalar(lf));
    }

    if (enable_mcl) {
      reps_rgb.push_back(rgb_out.representation);
      reps_event.push_back(event_out.representation);
    }
  }

  const T inv_b = T(1) / T(batch.size());
  nn::NodeId lm_sum = lm_terms[0];
  for (size_t i = 1; i < lm_terms.size(); ++i) lm_sum = g.add(lm_sum, lm_terms[i]);
  out.loss_m = g.scale_const(lm_sum, inv_b);

  if (enable_mfrm) {
    nn::NodeId lf_sum = lf_terms[0];
    for (size_t i = 1; i < lf_terms.size(); ++i) lf_sum = g.add(lf_sum, lf_terms[i]);
    out.loss_f = g.scale_const(lf_sum, inv_b);
  }

  if (enable_mcl) {
    if (batch.size() < 2)
      throw std::invalid_argument("forward_batch: contrastive learning needs a batch of at least 2");
    const nn::NodeId scale =
        g.exp_clamped(g.leaf(&model.log_scale->value, &model.log_scale->grad), Cm3aeModel<T>::kMaxLogitScale);
    out.ls = g.scalar(scale);
    const nn::NodeId rgb_batch = g.concat_rows(reps_rgb);
    const nn::NodeId event_batch = g.concat_rows(reps_event);
    const nn::NodeId vox_batch = g.concat_rows(reps_vox);
    out.loss_cl = total_contrastive_loss<T>(g, rgb_batch, event_batch, vox_batch, scale);
  }

  out.total = total_loss(g, out.loss_m, out.loss_f, out.loss_cl);
  return out;
}

// Encoder forward over a fully visible image (every patch + CLS), used by the
// linear probe and attention export.
template <typename T>
TokenSequence<T> encode_image_full(nn::Graph<T>& g, const Cm3aeModel<T>& model, const ImageArray& image,
                                   bool event_modality, int capture_layer = -1, Mat<T>* attn_capture = nullptr) {
  const auto& branch = event_modality ? model.event : model.rgb;
  const PatchSequence patches = patchify(image, model.config.patch_size);
  std::vector<int> all(static_cast<size_t>(patches.num_patches));
  for (int i = 0; i < patches.num_patches; ++i) all[static_cast<size_t>(i)] = i;
  return encode_modality(g, embed_visible_patches(g, patches, all, branch), branch.blocks, capture_layer,
                         attn_capture);
}

}  // namespace cm3ae
