// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include "cm3ae/model/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace cm3ae {

namespace {

std::vector<int> complement(int n, const std::vector<int>& sorted_subset) {
  std::vector<int> out;
  out.reserve(static_cast<size_t>(n) - sorted_subset.size());
  size_t k = 0;
  for (int i = 0; i < n; ++i) {
    if (k < sorted_subset.size() && sorted_subset[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

}  // namespace

std::vector<int> MaskPlan::rgb_masked() const { return complement(num_patches, rgb_visible); }
std::vector<int> MaskPlan::event_masked() const { return complement(num_patches, event_visible); }

int visible_count(int num_patches, double mask_ratio) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0))
    throw std::invalid_argument("mask_ratio must lie in (0,1), got " + std::to_string(mask_ratio));
  return static_cast<int>(std::lround(num_patches * (1.0 - mask_ratio)));
}

int shared_count(int visible) { return (visible + 1) / 2; }

PatchSequence patchify(const ImageArray& image, int patch_size) {
  if (patch_size <= 0) throw std::invalid_argument("patchify: patch_size must be positive");
  if (image.height % patch_size != 0 || image.width % patch_size != 0) {
    throw std::invalid_argument("patchify: image " + std::to_string(image.height) + "x" +
                                std::to_string(image.width) + " not divisible by patch size " +
                                std::to_string(patch_size));
  }
  PatchSequence out;
  out.grid_h = image.height / patch_size;
  out.grid_w = image.width / patch_size;
  out.patch_size = patch_size;
  out.channels = image.channels;
  out.num_patches = out.grid_h * out.grid_w;
  out.patch_dim = patch_size * patch_size * image.channels;
  out.patches.resize(static_cast<size_t>(out.num_patches) * out.patch_dim);
  for (int gr = 0; gr < out.grid_h; ++gr) {
    for (int gc = 0; gc < out.grid_w; ++gc) {
      float* dst = out.patch(gr * out.grid_w + gc);
      for (int r = 0; r < patch_size; ++r) {
        const float* src = &image.values[((static_cast<size_t>(gr) * patch_size + r) * image.width +
                                          static_cast<size_t>(gc) * patch_size) *
                                         image.channels];
        std::copy_n(src, static_cast<size_t>(patch_size) * image.channels,
                    dst + static_cast<size_t>(r) * patch_size * image.channels);
      }
    }
  }
  return out;
}

ImageArray unpatchify(const PatchSequence& patches, int patch_size) {
  if (patch_size != patches.patch_size)
    throw std::invalid_argument("unpatchify: patch_size differs from the sequence's");
  if (patches.num_patches != patches.grid_h * patches.grid_w ||
      patches.patch_dim != patch_size * patch_size * patches.channels) {
    throw std::invalid_argument("unpatchify: inconsistent patch grid");
  }
  ImageArray out(patches.grid_h * patch_size, patches.grid_w * patch_size, patches.channels);
  for (int gr = 0; gr < patches.grid_h; ++gr) {
    for (int gc = 0; gc < patches.grid_w; ++gc) {
      const float* src = patches.patch(gr * patches.grid_w + gc);
      for (int r = 0; r < patch_size; ++r) {
        float* dst = &out.values[((static_cast<size_t>(gr) * patch_size + r) * out.width +
                                  static_cast<size_t>(gc) * patch_size) *
                                 out.channels];
        std::copy_n(src + static_cast<size_t>(r) * patch_size * out.channels,
                    static_cast<size_t>(patch_size) * out.channels, dst);
      }
    }
  }
  return out;
}

MaskPlan sample_mask_plan(int num_patches, double mask_ratio, Rng& rng) {
  const int v = visible_count(num_patches, mask_ratio);
  const int s = shared_count(v);
  if (v < 2) throw std::invalid_argument("sample_mask_plan: visible count " + std::to_string(v) + " < 2");
  const int draw_total = 2 * v - s;
  if (draw_total > num_patches) {
    throw std::invalid_argument(
        "sample_mask_plan: ratio " + std::to_string(mask_ratio) + " needs " + std::to_string(draw_total) +
        " distinct positions out of " + std::to_string(num_patches) +
        "; the shared-half constraint is infeasible below ratio ~1/3");
  }

  // Partial Fisher-Yates: the first s draws are the shared positions, the
  // next v-s are RGB-only, the final v-s are Event-only. Consecutive draws
  // from the shrinking pool are exactly "uniform from the remainder".
  std::vector<int> pool(static_cast<size_t>(num_patches));
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < draw_total; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<uint64_t>(num_patches - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }

  MaskPlan plan;
  plan.num_patches = num_patches;
  plan.visible_count = v;
  plan.shared_count = s;
  plan.shared.assign(pool.begin(), pool.begin() + s);
  std::sort(plan.shared.begin(), plan.shared.end());
  plan.rgb_visible.assign(pool.begin(), pool.begin() + s);
  plan.rgb_visible.insert(plan.rgb_visible.end(), pool.begin() + s, pool.begin() + v);
  std::sort(plan.rgb_visible.begin(), plan.rgb_visible.end());
  plan.event_visible.assign(pool.begin(), pool.begin() + s);
  plan.event_visible.insert(plan.event_visible.end(), pool.begin() + v, pool.begin() + draw_total);
  std::sort(plan.event_visible.begin(), plan.event_visible.end());
  return plan;
}

void validate_mask_plan(const MaskPlan& plan) {
  auto fail = [](const std::string& what) { throw std::logic_error("mask plan invariant violated: " + what); };
  const int n = plan.num_patches;
  auto check_set = [&](const std::vector<int>& v, const char* name, size_t expect) {
    if (v.size() != expect) fail(std::string(name) + " has wrong length");
    for (size_t i = 0; i < v.size(); ++i) {
      if (v[i] < 0 || v[i] >= n) fail(std::string(name) + " index out of range");
      if (i > 0 && v[i] <= v[i - 1]) fail(std::string(name) + " not sorted distinct");
    }
  };
  check_set(plan.rgb_visible, "rgb_visible", static_cast<size_t>(plan.visible_count));
  check_set(plan.event_visible, "event_visible", static_cast<size_t>(plan.visible_count));
  check_set(plan.shared, "shared", static_cast<size_t>(plan.shared_count));
  if (plan.shared_count != shared_count(plan.visible_count)) fail("shared_count != ceil(v/2)");

  std::vector<int> inter;
  std::set_intersection(plan.rgb_visible.begin(), plan.rgb_visible.end(), plan.event_visible.begin(),
                        plan.event_visible.end(), std::back_inserter(inter));
  if (inter != plan.shared) fail("shared != rgb_visible n event_visible");

  // extras disjoint <=> |intersection| == s, already established by set equality
  std::unordered_set<int> shared_set(plan.shared.begin(), plan.shared.end());
  int rgb_only = 0, event_only = 0;
  for (int i : plan.rgb_visible)
    if (!shared_set.count(i)) ++rgb_only;
  for (int i : plan.event_visible)
    if (!shared_set.count(i)) ++event_only;
  if (rgb_only != plan.visible_count - plan.shared_count) fail("rgb-only extra count");
  if (event_only != plan.visible_count - plan.shared_count) fail("event-only extra count");
}

}  // namespace cm3ae
