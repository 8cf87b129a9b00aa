// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cm3ae/model/masking.hpp"
#include "cm3ae/model/voxel.hpp"

namespace cm3ae {

// One aligned training example: an RGB frame, the polarity-rendered event
// frame (positive events in channel 0, negative in channel 2, channel 1
// zero), and the voxel set built from the same events.
struct SamplePair {
  ImageArray rgb;
  ImageArray event;
  VoxelSet voxels;
  int label = -1;  // optional class id, -1 when unlabeled
};

struct SyntheticConfig {
  int image_size = 64;
  int shape_count = 3;            // dominant shape plus distractors
  int classes = 4;                // square / disk / triangle / cross
  double motion_magnitude = 4.0;  // per-axis shape translation in pixels
  double event_threshold = 0.1;   // brightness change per emitted event
  double texture_amplitude = 0.08;
  int voxel_count = 160;          // V after resampling
  int events_per_voxel = 14;
  int vox_grid_xy = 8;            // spatial binning of the voxel grid
  int vox_grid_t = 4;             // temporal binning
  int max_retries = 8;
};

// A raw (un-resampled) event: pixel coordinates, timestamp in [0,1],
// polarity 0/1.
struct RawEvent {
  int x = 0;
  int y = 0;
  float t = 0.0f;
  uint8_t polarity = 0;
};

// Renders two consecutive frames of moving shapes over a static textured
// background, emits events from the per-pixel brightness differences, and
// bins them into voxels. Pure function of (seed, config); the dominant shape
// class (== label) is seed % classes. Throws after bounded retries when the
// scene produces no events (e.g. zero motion).
SamplePair generate_synthetic_pair(uint64_t seed, const SyntheticConfig& config);

// The raw event stream of the same (seed, config) scene, for tests that
// check frame/voxel consistency against the generator's own events.
std::vector<RawEvent> generate_synthetic_events(uint64_t seed, const SyntheticConfig& config);

// Sample directory layout: rgb.png + event.png + events.vox + optional
// label.txt (single integer line).
void save_sample(const SamplePair& sample, const std::string& dir);

// Loads a sample directory. Missing events.vox is tolerated only when
// require_voxels is false (voxel branch disabled); every other missing file
// is an error naming the file.
SamplePair load_sample(const std::string& dir, bool require_voxels = true);

}  // namespace cm3ae
