// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

#include "cm3ae/model/voxel.hpp"

namespace cm3ae {

// File-format violation with the byte offset where the check failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& path, size_t byte_offset, const std::string& what)
      : std::runtime_error(path + " @ byte " + std::to_string(byte_offset) + ": " + what), offset(byte_offset) {}
  size_t offset;
};

// CMVX container:
//   magic   "CMVX" (4 bytes)
//   version u32 = 1, little-endian
//   voxel_count u32
//   record_width u32 (= events_per_voxel * attrs_per_event)
//   voxel_count * record_width IEEE-754 binary32 values, little-endian
// The reader validates magic, version, and the exact file length; round trips
// are bit-exact.
void write_voxel_file(const VoxelSet& voxels, const std::string& path);
VoxelSet read_voxel_file(const std::string& path, int events_per_voxel = 14, int attrs_per_event = 4);

}  // namespace cm3ae
