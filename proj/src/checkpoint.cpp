// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0

#include "cm3ae/harness/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cm3ae {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ofstream& out, uint32_t v) {
  const uint8_t b[4] = {static_cast<uint8_t>(v), static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v >> 16),
                        static_cast<uint8_t>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in, const std::string& path, const char* what) {
  uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error(path + ": truncated while reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

void write_cmck(const std::string& path, const NamedTensors& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  for (const auto& [name, tensor] : entries) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<uint32_t>(tensor.rows));
    put_u32(out, static_cast<uint32_t>(tensor.cols));
    for (float v : tensor.data) put_u32(out, std::bit_cast<uint32_t>(v));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

NamedTensors read_cmck(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error(path + ": bad magic (expected CMCK)");
  const uint32_t version = get_u32(in, path, "version");
  if (version != kVersion) throw std::runtime_error(path + ": unsupported version " + std::to_string(version));

  NamedTensors entries;
  for (;;) {
    in.peek();
    if (in.eof()) break;
    const uint32_t name_len = get_u32(in, path, "name length");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw std::runtime_error(path + ": truncated while reading name");
    const uint32_t rank = get_u32(in, path, "rank");
    if (rank != 2) throw std::runtime_error(path + ": unsupported tensor rank " + std::to_string(rank));
    const uint32_t rows = get_u32(in, path, "rows");
    const uint32_t cols = get_u32(in, path, "cols");
    Mat<float> t(static_cast<int>(rows), static_cast<int>(cols));
    for (size_t i = 0; i < t.size(); ++i) t.data[i] = std::bit_cast<float>(get_u32(in, path, "tensor data"));
    entries.emplace_back(std::move(name), std::move(t));
  }
  return entries;
}

const Mat<float>* find_tensor(const NamedTensors& entries, const std::string& name) {
  for (const auto& [n, t] : entries) {
    if (n == name) return &t;
  }
  return nullptr;
}

Mat<float> bits_to_tensor(const std::vector<uint32_t>& words) {
  Mat<float> t(1, static_cast<int>(words.size()));
  for (size_t i = 0; i < words.size(); ++i) t.data[i] = std::bit_cast<float>(words[i]);
  return t;
}

std::vector<uint32_t> tensor_to_bits(const Mat<float>& t) {
  std::vector<uint32_t> out(t.size());
  for (size_t i = 0; i < t.size(); ++i) out[i] = std::bit_cast<uint32_t>(t.data[i]);
  return out;
}

}  // namespace cm3ae
