// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "cm3ae/core/matrix.hpp"
#include "cm3ae/core/rng.hpp"

namespace cm3ae {

// Fixed-count set of event-voxel records. Each record is `events_per_voxel`
// events of `attrs_per_event` attributes in (x, y, t, polarity) order; x, y, t
// are normalized to [0,1], polarity is 0 or 1.
struct VoxelSet {
  int events_per_voxel = 14;
  int attrs_per_event = 4;
  Mat<float> records;  // count x (events_per_voxel * attrs_per_event)

  int count() const { return records.rows; }
  int record_width() const { return events_per_voxel * attrs_per_event; }
  bool empty() const { return records.rows == 0; }
};

// Resamples a raw record set to exactly `target` records: pass-through when
// the count already matches, pad by uniform sampling with replacement when
// short, uniform subsample without replacement (original order kept) when
// long.
inline VoxelSet resample_voxels(const VoxelSet& raw, int target, Rng& rng) {
  if (raw.count() == 0) throw std::invalid_argument("resample_voxels: empty input voxel set");
  if (target <= 0) throw std::invalid_argument("resample_voxels: target count must be positive");
  VoxelSet out;
  out.events_per_voxel = raw.events_per_voxel;
  out.attrs_per_event = raw.attrs_per_event;
  const int w = raw.record_width();
  out.records = Mat<float>(target, w);
  const int n = raw.count();
  if (n == target) {
    out.records = raw.records;
  } else if (n < target) {
    for (int i = 0; i < n; ++i) std::copy_n(raw.records.row(i), w, out.records.row(i));
    for (int i = n; i < target; ++i) {
      const int j = static_cast<int>(rng.below(static_cast<uint64_t>(n)));
      std::copy_n(raw.records.row(j), w, out.records.row(i));
    }
  } else {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = 0; i < target; ++i) {
      const auto j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n - i)));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(target));
    std::sort(idx.begin(), idx.end());
    for (int i = 0; i < target; ++i) std::copy_n(raw.records.row(idx[static_cast<size_t>(i)]), w, out.records.row(i));
  }
  return out;
}

// Record ordering used by voxel tokenization: ascending (t, y, x) of the
// record's first event, full-record lexicographic tiebreak.
inline bool voxel_record_less(const float* a, const float* b, int width) {
  // attrs are (x, y, t, p): compare t, then y, then x of the first event
  if (a[2] != b[2]) return a[2] < b[2];
  if (a[1] != b[1]) return a[1] < b[1];
  if (a[0] != b[0]) return a[0] < b[0];
  for (int i = 3; i < width; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

}  // namespace cm3ae
