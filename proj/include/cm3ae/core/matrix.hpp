// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

namespace cm3ae {

// Dense row-major matrix. The only tensor rank used anywhere in the model:
// token sequences are (length x dim), images are flattened patch rows,
// scalars are 1x1.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), T(0)) {}
  Mat(int r, int c, T fill) : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

  static Mat scalar(T v) {
    Mat m(1, 1);
    m.data[0] = v;
    return m;
  }

  T* row(int i) { return data.data() + static_cast<size_t>(i) * cols; }
  const T* row(int i) const { return data.data() + static_cast<size_t>(i) * cols; }
  T& at(int i, int j) { return data[static_cast<size_t>(i) * cols + j]; }
  T at(int i, int j) const { return data[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  template <typename U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

}  // namespace cm3ae
