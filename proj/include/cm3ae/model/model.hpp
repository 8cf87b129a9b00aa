// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cm3ae/model/config.hpp"
#include "cm3ae/model/params.hpp"
#include "cm3ae/nn/blocks.hpp"

namespace cm3ae {

template <typename T>
struct ImageBranch {
  nn::LinearParams<T> embed;  // patch_dim -> encoder dim
  Param<T>* cls = nullptr;    // 1 x encoder dim
  Param<T>* pos = nullptr;    // (N+1) x encoder dim, row 0 is the CLS slot
  std::vector<nn::BlockParams<T>> blocks;
  nn::LinearParams<T> proj;   // encoder dim -> decoder dim
};

template <typename T>
struct VoxelBranch {
  nn::LinearParams<T> embed;  // group_width -> encoder dim
  Param<T>* cls = nullptr;
  Param<T>* pos = nullptr;    // (G+1) x encoder dim
  std::vector<nn::BlockParams<T>> blocks;
};

template <typename T>
struct DecoderBranch {
  Param<T>* mask_token = nullptr;  // 1 x decoder dim, shared across masked slots
  Param<T>* pos = nullptr;         // (N+1) x decoder dim
  std::vector<nn::BlockParams<T>> blocks;
  nn::LinearParams<T> head;        // decoder dim -> patch_dim
};

// All learnable state of the pre-training model. Construction order is fixed
// so that a given (config, seed) always produces the same parameter values,
// in either precision.
template <typename T>
struct Cm3aeModel {
  ModelConfig config;
  ParamStore<T> store;

  ImageBranch<T> rgb, event;
  VoxelBranch<T> voxel;
  DecoderBranch<T> rgb_dec, event_dec;
  std::optional<DecoderBranch<T>> fused_dec;  // only with config.dedicated_fusion_decoder
  nn::BlockParams<T> fusion_block;
  Param<T>* fusion_mask_token = nullptr;      // 1 x decoder dim
  nn::LinearParams<T> vox_proj;               // encoder dim -> decoder dim
  Param<T>* log_scale = nullptr;              // contrastive scale, log space

  Cm3aeModel(ModelConfig cfg, uint64_t seed) : config(cfg) {
    config.validate();
    Rng rng(seed, /*stream=*/0x9d5f);
    const int n1 = config.num_patches() + 1;
    const int g1 = config.voxel_groups() + 1;
    const auto& enc = config.encoder;
    const auto& dec = config.decoder;

    rgb = make_image_branch("rgb", ParamGroup::rgb_encoder, n1, rng);
    event = make_image_branch("event", ParamGroup::event_encoder, n1, rng);

    voxel.embed = nn::make_linear(store, "voxel.embed", ParamGroup::voxel_encoder, config.group_width(), enc.dim, rng);
    voxel.cls = store.add("voxel.cls", ParamGroup::voxel_encoder, 1, enc.dim, Init::trunc_normal, rng);
    voxel.pos = store.add("voxel.pos", ParamGroup::voxel_encoder, g1, enc.dim, Init::trunc_normal, rng);
    for (int i = 0; i < enc.depth; ++i) {
      voxel.blocks.push_back(nn::make_block(store, "voxel.block" + std::to_string(i), ParamGroup::voxel_encoder,
                                            enc.dim, enc.heads, enc.mlp_ratio, rng));
    }

    rgb_dec = make_decoder("dec_rgb", ParamGroup::rgb_decoder, n1, rng);
    event_dec = make_decoder("dec_event", ParamGroup::event_decoder, n1, rng);
    if (config.dedicated_fusion_decoder) {
      fused_dec = make_decoder("dec_fused", ParamGroup::fusion_decoder, n1, rng);
    }

    fusion_block = nn::make_block(store, "fusion.block", ParamGroup::fusion, dec.dim, dec.heads, dec.mlp_ratio, rng);
    fusion_mask_token = store.add("fusion.mask_token", ParamGroup::fusion_mask, 1, dec.dim, Init::trunc_normal, rng);
    vox_proj = nn::make_linear(store, "fusion.vox_proj", ParamGroup::vox_projection, enc.dim, dec.dim, rng);

    // CLIP-style learnable temperature, ls = exp(log_scale) <= 100
    log_scale = store.add_scalar("contrastive.log_scale", ParamGroup::contrastive, T(std::log(1.0 / 0.07)));
  }

  // decoder used by the fused reconstruction branches (shared RGB decoder by
  // default)
  const DecoderBranch<T>& fusion_decoder() const { return fused_dec ? *fused_dec : rgb_dec; }

  static constexpr T kMaxLogitScale = T(100);

 private:
  ImageBranch<T> make_image_branch(const std::string& name, ParamGroup group, int n1, Rng& rng) {
    const auto& enc = config.encoder;
    ImageBranch<T> br;
    br.embed = nn::make_linear(store, name + ".embed", group, config.patch_dim(), enc.dim, rng);
    br.cls = store.add(name + ".cls", group, 1, enc.dim, Init::trunc_normal, rng);
    br.pos = store.add(name + ".pos", group, n1, enc.dim, Init::trunc_normal, rng);
    for (int i = 0; i < enc.depth; ++i) {
      br.blocks.push_back(
          nn::make_block(store, name + ".block" + std::to_string(i), group, enc.dim, enc.heads, enc.mlp_ratio, rng));
    }
    br.proj = nn::make_linear(store, name + ".proj", ParamGroup::projection, enc.dim, config.decoder.dim, rng);
    return br;
  }

  DecoderBranch<T> make_decoder(const std::string& name, ParamGroup group, int n1, Rng& rng) {
    const auto& dec = config.decoder;
    DecoderBranch<T> d;
    d.mask_token = store.add(name + ".mask_token", group, 1, dec.dim, Init::trunc_normal, rng);
    d.pos = store.add(name + ".pos", group, n1, dec.dim, Init::trunc_normal, rng);
    for (int i = 0; i < dec.depth; ++i) {
      d.blocks.push_back(
          nn::make_block(store, name + ".block" + std::to_string(i), group, dec.dim, dec.heads, dec.mlp_ratio, rng));
    }
    d.head = nn::make_linear(store, name + ".head", group, dec.dim, config.patch_dim(), rng);
    return d;
  }
};

// Parameter groups whose gradients exist under the given loss-term flags.
// Anything outside this set must stay bit-identical across training steps.
inline std::set<ParamGroup> enabled_groups(bool enable_mfrm, bool enable_mcl, bool dedicated_fusion_decoder) {
  std::set<ParamGroup> g = {ParamGroup::rgb_encoder, ParamGroup::event_encoder, ParamGroup::rgb_decoder,
                            ParamGroup::event_decoder, ParamGroup::projection};
  if (enable_mfrm || enable_mcl) {
    g.insert(ParamGroup::voxel_encoder);
    g.insert(ParamGroup::vox_projection);
  }
  if (enable_mfrm) {
    g.insert(ParamGroup::fusion);
    g.insert(ParamGroup::fusion_mask);
    if (dedicated_fusion_decoder) g.insert(ParamGroup::fusion_decoder);
  }
  if (enable_mcl) g.insert(ParamGroup::contrastive);
  return g;
}

}  // namespace cm3ae
