// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cm3ae {

struct EncoderConfig {
  int depth = 12;
  int dim = 768;
  int heads = 12;
  int mlp_ratio = 4;
};

struct DecoderConfig {
  int depth = 8;
  int dim = 512;
  int heads = 16;
  int mlp_ratio = 4;
};

struct VoxelConfig {
  int count = 1960;          // fixed voxel count V after resampling
  int events_per_voxel = 14;
  int attrs_per_event = 4;   // (x, y, t, polarity)
  int record_width() const { return events_per_voxel * attrs_per_event; }
};

struct ModelConfig {
  std::string preset = "paper";
  int image_size = 224;
  int patch_size = 16;
  int channels = 3;
  EncoderConfig encoder;       // both image encoders and the voxel encoder
  DecoderConfig decoder;
  VoxelConfig voxel;
  bool dedicated_fusion_decoder = false;  // ablation: own decoder for the fused branches
  bool mean_pool_representation = false;  // contrastive feature: CLS slot (default) or mean pool

  int grid() const { return image_size / patch_size; }
  int num_patches() const { return grid() * grid(); }
  int patch_dim() const { return patch_size * patch_size * channels; }
  int voxel_groups() const { return num_patches(); }  // one group per image patch
  int voxels_per_group() const { return voxel.count / voxel_groups(); }
  int group_width() const { return voxels_per_group() * voxel.record_width(); }

  void validate() const {
    if (image_size <= 0 || patch_size <= 0 || image_size % patch_size != 0)
      throw std::invalid_argument("config: image_size must be a positive multiple of patch_size");
    if (encoder.dim % encoder.heads != 0) throw std::invalid_argument("config: encoder dim not divisible by heads");
    if (decoder.dim % decoder.heads != 0) throw std::invalid_argument("config: decoder dim not divisible by heads");
    if (encoder.depth < 0 || decoder.depth < 0) throw std::invalid_argument("config: negative depth");
    if (voxel.count % voxel_groups() != 0)
      throw std::invalid_argument("config: voxel count not divisible by group count");
  }

  static ModelConfig paper() { return ModelConfig{}; }

  static ModelConfig toy() {
    ModelConfig c;
    c.preset = "toy";
    c.image_size = 64;           // 4x4 grid of 16x16 patches
    c.encoder = {2, 64, 2, 4};
    c.decoder = {1, 32, 2, 4};
    c.voxel = {160, 14, 4};      // 10 voxels per group over 16 groups
    return c;
  }

  static ModelConfig from_preset(const std::string& name) {
    if (name == "paper") return paper();
    if (name == "toy") return toy();
    throw std::invalid_argument("unknown preset '" + name + "' (expected paper|toy)");
  }

  std::string canonical_string() const {
    return preset + ";img=" + std::to_string(image_size) + ";patch=" + std::to_string(patch_size) +
           ";enc=" + std::to_string(encoder.depth) + "x" + std::to_string(encoder.dim) + "h" +
           std::to_string(encoder.heads) + "m" + std::to_string(encoder.mlp_ratio) +
           ";dec=" + std::to_string(decoder.depth) + "x" + std::to_string(decoder.dim) + "h" +
           std::to_string(decoder.heads) + "m" + std::to_string(decoder.mlp_ratio) +
           ";vox=" + std::to_string(voxel.count) + "e" + std::to_string(voxel.events_per_voxel) + "a" +
           std::to_string(voxel.attrs_per_event) + ";fdec=" + std::to_string(dedicated_fusion_decoder) +
           ";pool=" + std::to_string(mean_pool_representation);
  }

  uint64_t hash() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char ch : canonical_string()) {
      h ^= static_cast<unsigned char>(ch);
      h *= 0x100000001b3ull;
    }
    return h;
  }
};

}  // namespace cm3ae
