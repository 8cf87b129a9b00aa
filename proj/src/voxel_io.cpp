// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include "cm3ae/data/voxel_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <vector>

namespace cm3ae {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'V', 'X'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 24));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) | (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

void write_voxel_file(const VoxelSet& voxels, const std::string& path) {
  std::vector<uint8_t> buf;
  buf.reserve(16 + voxels.records.size() * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kVersion);
  put_u32(buf, static_cast<uint32_t>(voxels.count()));
  put_u32(buf, static_cast<uint32_t>(voxels.record_width()));
  for (float v : voxels.records.data) put_u32(buf, std::bit_cast<uint32_t>(v));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

VoxelSet read_voxel_file(const std::string& path, int events_per_voxel, int attrs_per_event) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("cannot open: " + path);
  const auto file_size = static_cast<size_t>(in.tellg());
  in.seekg(0);
  std::vector<uint8_t> buf(file_size);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(file_size));
  if (!in) throw std::runtime_error("read failed: " + path);

  if (file_size < 16) throw FormatError(path, file_size, "header truncated (need 16 bytes)");
  if (!std::equal(kMagic, kMagic + 4, buf.data())) throw FormatError(path, 0, "bad magic (expected CMVX)");
  const uint32_t version = get_u32(buf.data() + 4);
  if (version != kVersion) {
    throw FormatError(path, 4, "unsupported version " + std::to_string(version));
  }
  const uint32_t count = get_u32(buf.data() + 8);
  const uint32_t width = get_u32(buf.data() + 12);
  const uint32_t expect_width = static_cast<uint32_t>(events_per_voxel * attrs_per_event);
  if (width != expect_width) {
    throw FormatError(path, 12,
                      "record width " + std::to_string(width) + " does not match configured " +
                          std::to_string(expect_width));
  }
  const size_t expect_size = 16 + static_cast<size_t>(count) * width * 4;
  if (file_size != expect_size) {
    throw FormatError(path, std::min(file_size, expect_size),
                      "expected " + std::to_string(expect_size) + " bytes, file has " + std::to_string(file_size));
  }

  VoxelSet out;
  out.events_per_voxel = events_per_voxel;
  out.attrs_per_event = attrs_per_event;
  out.records = Mat<float>(static_cast<int>(count), static_cast<int>(width));
  const uint8_t* p = buf.data() + 16;
  for (size_t i = 0; i < out.records.size(); ++i, p += 4) {
    out.records.data[i] = std::bit_cast<float>(get_u32(p));
  }
  return out;
}

}  // namespace cm3ae
