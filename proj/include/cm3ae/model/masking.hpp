// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "cm3ae/core/rng.hpp"

namespace cm3ae {

// HWC image, values in [0,1].
struct ImageArray {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> values;

  ImageArray() = default;
  ImageArray(int h, int w, int c) : height(h), width(w), channels(c), values(static_cast<size_t>(h) * w * c, 0.0f) {}
  float& at(int y, int x, int c) { return values[(static_cast<size_t>(y) * width + x) * channels + c]; }
  float at(int y, int x, int c) const { return values[(static_cast<size_t>(y) * width + x) * channels + c]; }
};

// Flattened non-overlapping patches in row-major grid order. Within a patch
// the flattening order is rows, then columns, then channels.
struct PatchSequence {
  int num_patches = 0;
  int patch_dim = 0;
  int grid_h = 0;
  int grid_w = 0;
  int patch_size = 0;
  int channels = 0;
  std::vector<float> patches;  // num_patches x patch_dim, row-major

  float* patch(int i) { return patches.data() + static_cast<size_t>(i) * patch_dim; }
  const float* patch(int i) const { return patches.data() + static_cast<size_t>(i) * patch_dim; }
};

// Position-aligned visible/masked split for the two image modalities. The
// visible sets intersect in exactly `shared_count` positions and their
// non-shared remainders are disjoint.
struct MaskPlan {
  int num_patches = 0;
  int visible_count = 0;
  int shared_count = 0;
  std::vector<int> rgb_visible;    // sorted ascending
  std::vector<int> event_visible;  // sorted ascending
  std::vector<int> shared;         // sorted ascending, == rgb_visible n event_visible

  std::vector<int> rgb_masked() const;
  std::vector<int> event_masked() const;
};

// round(N * (1 - mask_ratio)); the rounding convention behind the
// {147, 98, 49, 29} visible counts at N=196.
int visible_count(int num_patches, double mask_ratio);

// ceil(v / 2): with v = 49 this gives the 25 shared positions that make the
// fused RGB+Event sequence 50 + 25 = 75 tokens long.
int shared_count(int visible);

PatchSequence patchify(const ImageArray& image, int patch_size);
ImageArray unpatchify(const PatchSequence& patches, int patch_size);

// Draws shared positions first, then the RGB-only and Event-only remainders
// from what is left, all uniformly without replacement. Deterministic given
// the generator state. Throws if the ratio is outside (0,1), if v < 2, or if
// the disjointness constraint cannot be met (needs 2v - s <= N).
MaskPlan sample_mask_plan(int num_patches, double mask_ratio, Rng& rng);

// Throws std::logic_error naming the first violated MaskPlan invariant.
void validate_mask_plan(const MaskPlan& plan);

}  // namespace cm3ae
