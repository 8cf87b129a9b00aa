// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cm3ae/core/matrix.hpp"
#include "cm3ae/kernels/kernels.hpp"

namespace cm3ae::nn {

using NodeId = int32_t;

// Reverse-mode tape over Mat<T>. One Graph per forward pass; node creation
// order is the topological order, backward() walks it in reverse. Leaves bound
// to external storage accumulate their gradients straight into the owner's
// grad buffer (the optimizer reads them there).
//
// With recording(false) the tape computes values only: no backward closures,
// no saved activations. Finite-difference probes use that mode.
template <typename T>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) { nodes_.reserve(512); }

  bool recording() const { return recording_; }

  const Mat<T>& val(NodeId id) const { return nodes_[checked(id)].external ? *nodes_[id].external : nodes_[id].owned; }
  T scalar(NodeId id) const {
    const Mat<T>& v = val(id);
    if (v.rows != 1 || v.cols != 1) throw std::invalid_argument("Graph::scalar: node is not 1x1");
    return v.data[0];
  }
  const Mat<T>& grad(NodeId id) const { return nodes_[checked(id)].grad; }

  NodeId constant(Mat<T> v) {
    Node n;
    n.owned = std::move(v);
    return push(std::move(n));
  }

  NodeId scalar_constant(T v) { return constant(Mat<T>::scalar(v)); }

  // Leaf bound to external storage. grad_out may be null for frozen tensors.
  NodeId leaf(const Mat<T>* value, Mat<T>* grad_out) {
    Node n;
    n.external = value;
    n.external_grad = grad_out;
    n.needs_grad = recording_ && grad_out != nullptr;
    return push(std::move(n));
  }

  // ---- elementwise -------------------------------------------------------

  NodeId add(NodeId a, NodeId b) {
    const Mat<T>&va = val(a), &vb = val(b);
    require(va.same_shape(vb), "add: shape mismatch");
    Mat<T> out(va.rows, va.cols);
    kernels::add(out.size(), va.data.data(), vb.data.data(), out.data.data());
    return make(std::move(out), {a, b}, [a, b](Graph& g, const Mat<T>& go) {
      g.accumulate(a, go);
      g.accumulate(b, go);
    });
  }

  NodeId sub(NodeId a, NodeId b) {
    const Mat<T>&va = val(a), &vb = val(b);
    require(va.same_shape(vb), "sub: shape mismatch");
    Mat<T> out(va.rows, va.cols);
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = va.data[i] - vb.data[i];
    return make(std::move(out), {a, b}, [a, b](Graph& g, const Mat<T>& go) {
      g.accumulate(a, go);
      if (g.wants_grad(b)) {
        Mat<T>& gb = g.grad_buf(b);
        for (size_t i = 0; i < go.size(); ++i) gb.data[i] -= go.data[i];
      }
    });
  }

  NodeId scale_const(NodeId a, T c) {
    const Mat<T>& va = val(a);
    Mat<T> out(va.rows, va.cols);
    kernels::scale(out.size(), c, va.data.data(), out.data.data());
    return make(std::move(out), {a}, [a, c](Graph& g, const Mat<T>& go) {
      if (g.wants_grad(a)) kernels::axpy(go.size(), c, go.data.data(), g.grad_buf(a).data.data());
    });
  }

  // out[i,:] = x[i,:] + row  (row is 1 x cols; bias / token broadcast)
  NodeId add_row_broadcast(NodeId x, NodeId row) {
    const Mat<T>&vx = val(x), &vr = val(row);
    require(vr.rows == 1 && vr.cols == vx.cols, "add_row_broadcast: row must be 1 x cols");
    Mat<T> out(vx.rows, vx.cols);
    for (int i = 0; i < vx.rows; ++i) {
      kernels::add(static_cast<size_t>(vx.cols), vx.row(i), vr.row(0), out.row(i));
    }
    return make(std::move(out), {x, row}, [x, row](Graph& g, const Mat<T>& go) {
      g.accumulate(x, go);
      if (g.wants_grad(row)) {
        Mat<T>& gr = g.grad_buf(row);
        for (int i = 0; i < go.rows; ++i) {
          kernels::axpy(static_cast<size_t>(go.cols), T(1), go.row(i), gr.row(0));
        }
      }
    });
  }

  // out = s * x where s is a 1x1 node
  NodeId mul_scalar_node(NodeId s, NodeId x) {
    const T sv = scalar(s);
    const Mat<T>& vx = val(x);
    Mat<T> out(vx.rows, vx.cols);
    kernels::scale(out.size(), sv, vx.data.data(), out.data.data());
    return make(std::move(out), {s, x}, [s, x, sv](Graph& g, const Mat<T>& go) {
      if (g.wants_grad(s)) {
        g.grad_buf(s).data[0] += kernels::dot(go.size(), go.data.data(), g.val(x).data.data());
      }
      if (g.wants_grad(x)) {
        kernels::axpy(go.size(), sv, go.data.data(), g.grad_buf(x).data.data());
      }
    });
  }

  // ---- linear algebra ----------------------------------------------------

  NodeId matmul(NodeId a, NodeId b) {
    const Mat<T>&va = val(a), &vb = val(b);
    require(va.cols == vb.rows, "matmul: inner dimension mismatch");
    Mat<T> out(va.rows, vb.cols);
    kernels::gemm_nn(va.rows, vb.cols, va.cols, va.data.data(), va.cols, vb.data.data(), vb.cols, T(0),
                     out.data.data(), out.cols);
    return make(std::move(out), {a, b}, [a, b](Graph& g, const Mat<T>& go) {
      const Mat<T>&va = g.val(a), &vb = g.val(b);
      if (g.wants_grad(a)) {  // dA += dC * B^T
        kernels::gemm_nt(go.rows, va.cols, go.cols, go.data.data(), go.cols, vb.data.data(), vb.cols, T(1),
                         g.grad_buf(a).data.data(), va.cols);
      }
      if (g.wants_grad(b)) {  // dB += A^T * dC
        kernels::gemm_tn(vb.rows, vb.cols, va.rows, va.data.data(), va.cols, go.data.data(), go.cols, T(1),
                         g.grad_buf(b).data.data(), vb.cols);
      }
    });
  }

  // C = A * B^T with A (m x k), B (n x k)
  NodeId matmul_nt(NodeId a, NodeId b) {
    const Mat<T>&va = val(a), &vb = val(b);
    require(va.cols == vb.cols, "matmul_nt: inner dimension mismatch");
    Mat<T> out(va.rows, vb.rows);
    kernels::gemm_nt(va.rows, vb.rows, va.cols, va.data.data(), va.cols, vb.data.data(), vb.cols, T(0),
                     out.data.data(), out.cols);
    return make(std::move(out), {a, b}, [a, b](Graph& g, const Mat<T>& go) {
      const Mat<T>&va = g.val(a), &vb = g.val(b);
      if (g.wants_grad(a)) {  // dA += dC * B
        kernels::gemm_nn(go.rows, vb.cols, go.cols, go.data.data(), go.cols, vb.data.data(), vb.cols, T(1),
                         g.grad_buf(a).data.data(), va.cols);
      }
      if (g.wants_grad(b)) {  // dB += dC^T * A
        kernels::gemm_tn(vb.rows, vb.cols, va.rows, go.data.data(), go.cols, va.data.data(), va.cols, T(1),
                         g.grad_buf(b).data.data(), vb.cols);
      }
    });
  }

  // ---- nonlinearities ----------------------------------------------------

  NodeId gelu(NodeId x) {
    const Mat<T>& vx = val(x);
    Mat<T> out(vx.rows, vx.cols);
    for (size_t i = 0; i < vx.size(); ++i) {
      const T v = vx.data[i];
      out.data[i] = T(0.5) * v * (T(1) + std::erf(v * T(0.7071067811865475)));
    }
    return make(std::move(out), {x}, [x](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(x)) return;
      const Mat<T>& vx = g.val(x);
      Mat<T>& gx = g.grad_buf(x);
      constexpr T inv_sqrt2 = T(0.7071067811865475);
      constexpr T inv_sqrt2pi = T(0.3989422804014327);
      for (size_t i = 0; i < vx.size(); ++i) {
        const T v = vx.data[i];
        const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * v * v);
        gx.data[i] += go.data[i] * (cdf + v * pdf);
      }
    });
  }

  // Per-row layer normalization with learnable gamma/beta (1 x cols each).
  NodeId layer_norm(NodeId x, NodeId gamma, NodeId beta, T eps = T(1e-6)) {
    const Mat<T>&vx = val(x), &vg = val(gamma), &vb = val(beta);
    require(vg.rows == 1 && vg.cols == vx.cols && vb.rows == 1 && vb.cols == vx.cols,
            "layer_norm: gamma/beta must be 1 x cols");
    const int rows = vx.rows, cols = vx.cols;
    Mat<T> out(rows, cols);
    Mat<T> xhat(recording_ ? rows : 0, recording_ ? cols : 0);
    std::vector<T> inv_sigma(recording_ ? rows : 0);
    for (int i = 0; i < rows; ++i) {
      const T* xi = vx.row(i);
      T mean = kernels::sum(static_cast<size_t>(cols), xi) / T(cols);
      T var = T(0);
      for (int j = 0; j < cols; ++j) {
        const T d = xi[j] - mean;
        var += d * d;
      }
      var /= T(cols);
      const T inv = T(1) / std::sqrt(var + eps);
      T* oi = out.row(i);
      for (int j = 0; j < cols; ++j) {
        const T h = (xi[j] - mean) * inv;
        if (recording_) xhat.row(i)[j] = h;
        oi[j] = h * vg.row(0)[j] + vb.row(0)[j];
      }
      if (recording_) inv_sigma[i] = inv;
    }
    return make(std::move(out), {x, gamma, beta},
                [x, gamma, beta, xh = std::move(xhat), inv = std::move(inv_sigma)](Graph& g, const Mat<T>& go) {
                  const int rows = go.rows, cols = go.cols;
                  const Mat<T>& vg = g.val(gamma);
                  if (g.wants_grad(gamma)) {
                    Mat<T>& gg = g.grad_buf(gamma);
                    for (int i = 0; i < rows; ++i)
                      for (int j = 0; j < cols; ++j) gg.row(0)[j] += go.row(i)[j] * xh.row(i)[j];
                  }
                  if (g.wants_grad(beta)) {
                    Mat<T>& gb = g.grad_buf(beta);
                    for (int i = 0; i < rows; ++i) {
                      kernels::axpy(static_cast<size_t>(cols), T(1), go.row(i), gb.row(0));
                    }
                  }
                  if (g.wants_grad(x)) {
                    Mat<T>& gx = g.grad_buf(x);
                    std::vector<T> dxhat(static_cast<size_t>(cols));
                    for (int i = 0; i < rows; ++i) {
                      T mean_dx = T(0), mean_dxxh = T(0);
                      for (int j = 0; j < cols; ++j) {
                        dxhat[j] = go.row(i)[j] * vg.row(0)[j];
                        mean_dx += dxhat[j];
                        mean_dxxh += dxhat[j] * xh.row(i)[j];
                      }
                      mean_dx /= T(cols);
                      mean_dxxh /= T(cols);
                      for (int j = 0; j < cols; ++j) {
                        gx.row(i)[j] += inv[i] * (dxhat[j] - mean_dx - xh.row(i)[j] * mean_dxxh);
                      }
                    }
                  }
                });
  }

  // Row-wise softmax, stabilized by row-max subtraction.
  NodeId softmax_rows(NodeId x) {
    const Mat<T>& vx = val(x);
    Mat<T> out(vx.rows, vx.cols);
    for (int i = 0; i < vx.rows; ++i) {
      const T* xi = vx.row(i);
      T mx = xi[0];
      for (int j = 1; j < vx.cols; ++j) mx = std::max(mx, xi[j]);
      T z = T(0);
      T* oi = out.row(i);
      for (int j = 0; j < vx.cols; ++j) {
        oi[j] = std::exp(xi[j] - mx);
        z += oi[j];
      }
      const T invz = T(1) / z;
      for (int j = 0; j < vx.cols; ++j) oi[j] *= invz;
    }
    NodeId id = make(std::move(out), {x}, [x](Graph& g, const Mat<T>& go) { /* filled below */ });
    // backward needs this node's own value; rebind with the id captured
    if (!nodes_[id].backward) return id;
    nodes_[id].backward = [x, id](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(x)) return;
      const Mat<T>& y = g.val(id);
      Mat<T>& gx = g.grad_buf(x);
      for (int i = 0; i < y.rows; ++i) {
        const T dotv = kernels::dot(static_cast<size_t>(y.cols), go.row(i), y.row(i));
        for (int j = 0; j < y.cols; ++j) gx.row(i)[j] += y.row(i)[j] * (go.row(i)[j] - dotv);
      }
    };
    return id;
  }

  // Row-wise L2 normalization; rejects degenerate (zero-norm) rows.
  NodeId l2_normalize_rows(NodeId x) {
    const Mat<T>& vx = val(x);
    Mat<T> out(vx.rows, vx.cols);
    std::vector<T> inv_norm(static_cast<size_t>(vx.rows));
    for (int i = 0; i < vx.rows; ++i) {
      const T n2 = kernels::dot(static_cast<size_t>(vx.cols), vx.row(i), vx.row(i));
      if (!(n2 > T(0))) throw std::invalid_argument("l2_normalize_rows: zero-norm row " + std::to_string(i));
      inv_norm[i] = T(1) / std::sqrt(n2);
      kernels::scale(static_cast<size_t>(vx.cols), inv_norm[i], vx.row(i), out.row(i));
    }
    NodeId id = make(std::move(out), {x}, nullptr);
    if (recording_ && nodes_[id].needs_grad) {
      nodes_[id].backward = [x, id, inv = std::move(inv_norm)](Graph& g, const Mat<T>& go) {
        if (!g.wants_grad(x)) return;
        const Mat<T>& y = g.val(id);
        Mat<T>& gx = g.grad_buf(x);
        for (int i = 0; i < y.rows; ++i) {
          const T dotv = kernels::dot(static_cast<size_t>(y.cols), go.row(i), y.row(i));
          for (int j = 0; j < y.cols; ++j) gx.row(i)[j] += inv[i] * (go.row(i)[j] - y.row(i)[j] * dotv);
        }
      };
    }
    return id;
  }

  // ---- shape ops ---------------------------------------------------------

  NodeId slice_rows(NodeId x, int off, int len) {
    const Mat<T>& vx = val(x);
    require(off >= 0 && len >= 0 && off + len <= vx.rows, "slice_rows: out of range");
    Mat<T> out(len, vx.cols);
    std::copy_n(vx.row(off), static_cast<size_t>(len) * vx.cols, out.data.data());
    return make(std::move(out), {x}, [x, off](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(x)) return;
      Mat<T>& gx = g.grad_buf(x);
      for (int i = 0; i < go.rows; ++i) {
        kernels::axpy(static_cast<size_t>(go.cols), T(1), go.row(i), gx.row(off + i));
      }
    });
  }

  NodeId slice_cols(NodeId x, int off, int len) {
    const Mat<T>& vx = val(x);
    require(off >= 0 && len >= 0 && off + len <= vx.cols, "slice_cols: out of range");
    Mat<T> out(vx.rows, len);
    for (int i = 0; i < vx.rows; ++i) std::copy_n(vx.row(i) + off, len, out.row(i));
    return make(std::move(out), {x}, [x, off](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(x)) return;
      Mat<T>& gx = g.grad_buf(x);
      for (int i = 0; i < go.rows; ++i) {
        kernels::axpy(static_cast<size_t>(go.cols), T(1), go.row(i), gx.row(i) + off);
      }
    });
  }

  NodeId concat_rows(std::span<const NodeId> parts) {
    require(!parts.empty(), "concat_rows: empty");
    const int cols = val(parts[0]).cols;
    int rows = 0;
    for (NodeId p : parts) {
      require(val(p).cols == cols, "concat_rows: column mismatch");
      rows += val(p).rows;
    }
    Mat<T> out(rows, cols);
    int r = 0;
    for (NodeId p : parts) {
      const Mat<T>& vp = val(p);
      std::copy_n(vp.data.data(), vp.size(), out.row(r));
      r += vp.rows;
    }
    std::vector<NodeId> deps(parts.begin(), parts.end());
    return make(std::move(out), deps, [deps](Graph& g, const Mat<T>& go) {
      int r = 0;
      for (NodeId p : deps) {
        const int pr = g.val(p).rows;
        if (g.wants_grad(p)) {
          Mat<T>& gp = g.grad_buf(p);
          kernels::axpy(gp.size(), T(1), go.row(r), gp.data.data());
        }
        r += pr;
      }
    });
  }

  NodeId concat_cols(std::span<const NodeId> parts) {
    require(!parts.empty(), "concat_cols: empty");
    const int rows = val(parts[0]).rows;
    int cols = 0;
    for (NodeId p : parts) {
      require(val(p).rows == rows, "concat_cols: row mismatch");
      cols += val(p).cols;
    }
    Mat<T> out(rows, cols);
    int c = 0;
    for (NodeId p : parts) {
      const Mat<T>& vp = val(p);
      for (int i = 0; i < rows; ++i) std::copy_n(vp.row(i), vp.cols, out.row(i) + c);
      c += vp.cols;
    }
    std::vector<NodeId> deps(parts.begin(), parts.end());
    return make(std::move(out), deps, [deps](Graph& g, const Mat<T>& go) {
      int c = 0;
      for (NodeId p : deps) {
        const int pc = g.val(p).cols;
        if (g.wants_grad(p)) {
          Mat<T>& gp = g.grad_buf(p);
          for (int i = 0; i < go.rows; ++i) {
            kernels::axpy(static_cast<size_t>(pc), T(1), go.row(i) + c, gp.row(i));
          }
        }
        c += pc;
      }
    });
  }

  NodeId gather_rows(NodeId x, std::vector<int> idx) {
    const Mat<T>& vx = val(x);
    for (int i : idx) require(i >= 0 && i < vx.rows, "gather_rows: index out of range");
    Mat<T> out(static_cast<int>(idx.size()), vx.cols);
    for (size_t i = 0; i < idx.size(); ++i) std::copy_n(vx.row(idx[i]), vx.cols, out.row(static_cast<int>(i)));
    return make(std::move(out), {x}, [x, ix = std::move(idx)](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(x)) return;
      Mat<T>& gx = g.grad_buf(x);
      for (size_t i = 0; i < ix.size(); ++i) {
        kernels::axpy(static_cast<size_t>(go.cols), T(1), go.row(static_cast<int>(i)), gx.row(ix[i]));
      }
    });
  }

  NodeId mean_rows(NodeId x) {
    const Mat<T>& vx = val(x);
    require(vx.rows > 0, "mean_rows: empty input");
    Mat<T> out(1, vx.cols);
    for (int i = 0; i < vx.rows; ++i) {
      kernels::axpy(static_cast<size_t>(vx.cols), T(1), vx.row(i), out.row(0));
    }
    const T inv = T(1) / T(vx.rows);
    kernels::scale(out.size(), inv, out.data.data(), out.data.data());
    return make(std::move(out), {x}, [x, inv](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(x)) return;
      Mat<T>& gx = g.grad_buf(x);
      for (int i = 0; i < gx.rows; ++i) {
        kernels::axpy(static_cast<size_t>(gx.cols), inv, go.row(0), gx.row(i));
      }
    });
  }

  // Scatter visible rows into a fresh (total_rows x cols) sequence; every slot
  // not named in `slots` holds a copy of the shared mask token.
  NodeId assemble_sequence(NodeId visible, const std::vector<int>& slots, NodeId mask_token, int total_rows) {
    const Mat<T>&vv = val(visible), &vm = val(mask_token);
    require(static_cast<int>(slots.size()) == vv.rows, "assemble_sequence: slots/rows mismatch");
    require(vm.rows == 1 && vm.cols == vv.cols, "assemble_sequence: mask token must be 1 x cols");
    std::vector<char> filled(static_cast<size_t>(total_rows), 0);
    Mat<T> out(total_rows, vv.cols);
    for (int r = 0; r < total_rows; ++r) std::copy_n(vm.row(0), vm.cols, out.row(r));
    for (size_t i = 0; i < slots.size(); ++i) {
      const int s = slots[i];
      require(s >= 0 && s < total_rows, "assemble_sequence: slot out of range");
      if (filled[static_cast<size_t>(s)]) throw std::invalid_argument("assemble_sequence: duplicate slot " + std::to_string(s));
      filled[static_cast<size_t>(s)] = 1;
      std::copy_n(vv.row(static_cast<int>(i)), vv.cols, out.row(s));
    }
    return make(std::move(out), {visible, mask_token},
                [visible, mask_token, sl = slots, fl = std::move(filled)](Graph& g, const Mat<T>& go) {
                  if (g.wants_grad(visible)) {
                    Mat<T>& gv = g.grad_buf(visible);
                    for (size_t i = 0; i < sl.size(); ++i) {
                      kernels::axpy(static_cast<size_t>(go.cols), T(1), go.row(sl[i]), gv.row(static_cast<int>(i)));
                    }
                  }
                  if (g.wants_grad(mask_token)) {
                    Mat<T>& gm = g.grad_buf(mask_token);
                    for (int r = 0; r < go.rows; ++r) {
                      if (!fl[static_cast<size_t>(r)]) {
                        kernels::axpy(static_cast<size_t>(go.cols), T(1), go.row(r), gm.row(0));
                      }
                    }
                  }
                });
  }

  // ---- losses ------------------------------------------------------------

  // Sum of squared differences over the listed rows (un-normalized; callers
  // divide by their pixel-count convention).
  NodeId masked_sq_err(NodeId pred, Mat<T> target, std::vector<int> rows) {
    const Mat<T>& vp = val(pred);
    require(vp.same_shape(target), "masked_sq_err: pred/target shape mismatch");
    T acc = T(0);
    for (int r : rows) {
      require(r >= 0 && r < vp.rows, "masked_sq_err: row out of range");
      for (int j = 0; j < vp.cols; ++j) {
        const T d = vp.row(r)[j] - target.row(r)[j];
        acc += d * d;
      }
    }
    return make(Mat<T>::scalar(acc), {pred},
                [pred, tgt = std::move(target), rs = std::move(rows)](Graph& g, const Mat<T>& go) {
                  if (!g.wants_grad(pred)) return;
                  const Mat<T>& vp = g.val(pred);
                  Mat<T>& gp = g.grad_buf(pred);
                  const T s = T(2) * go.data[0];
                  for (int r : rs) {
                    for (int j = 0; j < vp.cols; ++j) gp.row(r)[j] += s * (vp.row(r)[j] - tgt.row(r)[j]);
                  }
                });
  }

  // InfoNCE over a square logit matrix: -(1/N) sum_i log softmax(row_i)[i].
  NodeId info_nce(NodeId logits) {
    const Mat<T>& lg = val(logits);
    require(lg.rows == lg.cols, "info_nce: logits must be square");
    if (lg.rows < 2) throw std::invalid_argument("info_nce: batch of " + std::to_string(lg.rows) + " has no negatives");
    const int n = lg.rows;
    Mat<T> probs(recording_ ? n : 0, recording_ ? n : 0);
    T loss = T(0);
    std::vector<T> rowbuf(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      T mx = lg.row(i)[0];
      for (int j = 1; j < n; ++j) mx = std::max(mx, lg.row(i)[j]);
      T z = T(0);
      for (int j = 0; j < n; ++j) {
        rowbuf[static_cast<size_t>(j)] = std::exp(lg.row(i)[j] - mx);
        z += rowbuf[static_cast<size_t>(j)];
      }
      loss -= (lg.row(i)[i] - mx) - std::log(z);
      if (recording_) {
        for (int j = 0; j < n; ++j) probs.row(i)[j] = rowbuf[static_cast<size_t>(j)] / z;
      }
    }
    loss /= T(n);
    return make(Mat<T>::scalar(loss), {logits}, [logits, p = std::move(probs), n](Graph& g, const Mat<T>& go) {
      if (!g.wants_grad(logits)) return;
      Mat<T>& gl = g.grad_buf(logits);
      const T s = go.data[0] / T(n);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) gl.row(i)[j] += s * (p.row(i)[j] - (i == j ? T(1) : T(0)));
      }
    });
  }

  // Mean cross-entropy of logit rows against integer labels (probe training).
  NodeId cross_entropy_rows(NodeId logits, std::vector<int> labels) {
    const Mat<T>& lg = val(logits);
    require(static_cast<int>(labels.size()) == lg.rows, "cross_entropy_rows: label count mismatch");
    for (int l : labels) require(l >= 0 && l < lg.cols, "cross_entropy_rows: label out of range");
    const int n = lg.rows, c = lg.cols;
    Mat<T> probs(recording_ ? n : 0, recording_ ? c : 0);
    T loss = T(0);
    std::vector<T> rowbuf(static_cast<size_t>(c));
    for (int i = 0; i < n; ++i) {
      T mx = lg.row(i)[0];
      for (int j = 1; j < c; ++j) mx = std::max(mx, lg.row(i)[j]);
      T z = T(0);
      for (int j = 0; j < c; ++j) {
        rowbuf[static_cast<size_t>(j)] = std::exp(lg.row(i)[j] - mx);
        z += rowbuf[static_cast<size_t>(j)];
      }
      loss -= (lg.row(i)[labels[static_cast<size_t>(i)]] - mx) - std::log(z);
      if (recording_) {
        for (int j = 0; j < c; ++j) probs.row(i)[j] = rowbuf[static_cast<size_t>(j)] / z;
      }
    }
    loss /= T(n);
    return make(Mat<T>::scalar(loss), {logits},
                [logits, p = std::move(probs), lb = std::move(labels), n, c](Graph& g, const Mat<T>& go) {
                  if (!g.wants_grad(logits)) return;
                  Mat<T>& gl = g.grad_buf(logits);
                  const T s = go.data[0] / T(n);
                  for (int i = 0; i < n; ++i) {
                    for (int j = 0; j < c; ++j) {
                      gl.row(i)[j] += s * (p.row(i)[j] - (j == lb[static_cast<size_t>(i)] ? T(1) : T(0)));
                    }
                  }
                });
  }

  // exp of a 1x1 node, clamped to cap (gradient is zero while clamped)
  NodeId exp_clamped(NodeId x, T cap) {
    const T xv = scalar(x);
    const T e = std::exp(xv);
    const bool clamped = e > cap;
    return make(Mat<T>::scalar(clamped ? cap : e), {x}, [x, e, clamped](Graph& g, const Mat<T>& go) {
      if (!clamped && g.wants_grad(x)) g.grad_buf(x).data[0] += go.data[0] * e;
    });
  }

  // ---- backward ----------------------------------------------------------

  void backward(NodeId loss) {
    if (!recording_) throw std::logic_error("Graph::backward: tape was not recording");
    Node& ln = nodes_[checked(loss)];
    const Mat<T>& lv = val(loss);
    require(lv.rows == 1 && lv.cols == 1, "backward: loss must be 1x1");
    if (!ln.needs_grad) return;  // loss independent of every learnable leaf
    grad_buf(loss).data[0] = T(1);
    for (NodeId id = loss; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }

  size_t node_count() const { return nodes_.size(); }

  bool wants_grad(NodeId id) const { return nodes_[checked(id)].needs_grad; }

  Mat<T>& grad_buf(NodeId id) {
    Node& n = nodes_[checked(id)];
    if (n.external_grad) return *n.external_grad;
    if (n.grad.empty()) {
      const Mat<T>& v = val(id);
      n.grad = Mat<T>(v.rows, v.cols);
    }
    return n.grad;
  }

 private:
  struct Node {
    Mat<T> owned;
    const Mat<T>* external = nullptr;
    Mat<T>* external_grad = nullptr;
    Mat<T> grad;
    bool needs_grad = false;
    std::function<void(Graph&, const Mat<T>&)> backward;
  };

  static void require(bool cond, const char* msg) {
    if (!cond) throw std::invalid_argument(std::string("graph: ") + msg);
  }

  NodeId checked(NodeId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) throw std::logic_error("graph: bad node id");
    return id;
  }

  void accumulate(NodeId id, const Mat<T>& g) {
    if (!wants_grad(id)) return;
    Mat<T>& buf = grad_buf(id);
    kernels::axpy(buf.size(), T(1), g.data.data(), buf.data.data());
  }

  NodeId push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
  }

  template <typename Fn>
  NodeId make(Mat<T> value, std::initializer_list<NodeId> deps, Fn&& bw) {
    return make(std::move(value), std::vector<NodeId>(deps), std::forward<Fn>(bw));
  }

  template <typename Fn>
  NodeId make(Mat<T> value, const std::vector<NodeId>& deps, Fn&& bw) {
    Node n;
    n.owned = std::move(value);
    if (recording_) {
      for (NodeId d : deps) {
        if (nodes_[checked(d)].needs_grad) {
          n.needs_grad = true;
          break;
        }
      }
      if (n.needs_grad) {
        if constexpr (std::is_same_v<std::decay_t<Fn>, std::nullptr_t>) {
          // caller installs the closure after the id is known
        } else {
          n.backward = std::forward<Fn>(bw);
        }
      }
    }
    return push(std::move(n));
  }

  std::vector<Node> nodes_;
  bool recording_ = true;
};

}  // namespace cm3ae::nn
