// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "cm3ae/model/masking.hpp"

namespace cm3ae {

// 8-bit PNG round trip for [0,1]-valued images. Writing quantizes to
// round(v * 255); reading maps back as v / 255, so a write/read pair is exact
// to within 1/255 per value.
void write_png_rgb(const ImageArray& image, const std::string& path);
void write_png_gray(const Mat<float>& values, const std::string& path);  // values already in [0,1]
ImageArray read_png_rgb(const std::string& path);
Mat<float> read_png_gray(const std::string& path);

}  // namespace cm3ae
