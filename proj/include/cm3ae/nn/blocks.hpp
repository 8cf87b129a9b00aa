// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cm3ae/model/params.hpp"
#include "cm3ae/nn/graph.hpp"

namespace cm3ae::nn {

template <typename T>
struct LinearParams {
  Param<T>* w = nullptr;  // in x out
  Param<T>* b = nullptr;  // 1 x out
};

template <typename T>
struct LayerNormParams {
  Param<T>* gamma = nullptr;
  Param<T>* beta = nullptr;
};

// Pre-norm transformer block: x + MSA(LN(x)), then x + MLP(LN(x)).
template <typename T>
struct BlockParams {
  int dim = 0;
  int heads = 0;
  LayerNormParams<T> ln1;
  LinearParams<T> wq, wk, wv, wo;
  LayerNormParams<T> ln2;
  LinearParams<T> fc1, fc2;
};

template <typename T>
LinearParams<T> make_linear(ParamStore<T>& store, const std::string& name, ParamGroup group, int in, int out,
                            Rng& rng) {
  LinearParams<T> p;
  p.w = store.add(name + ".w", group, in, out, Init::trunc_normal, rng);
  p.b = store.add(name + ".b", group, 1, out, Init::zeros, rng);
  return p;
}

template <typename T>
LayerNormParams<T> make_layer_norm(ParamStore<T>& store, const std::string& name, ParamGroup group, int dim,
                                   Rng& rng) {
  LayerNormParams<T> p;
  p.gamma = store.add(name + ".gamma", group, 1, dim, Init::ones, rng);
  p.beta = store.add(name + ".beta", group, 1, dim, Init::zeros, rng);
  return p;
}

template <typename T>
BlockParams<T> make_block(ParamStore<T>& store, const std::string& name, ParamGroup group, int dim, int heads,
                          int mlp_ratio, Rng& rng) {
  BlockParams<T> blk;
  blk.dim = dim;
  blk.heads = heads;
  blk.ln1 = make_layer_norm(store, name + ".ln1", group, dim, rng);
  blk.wq = make_linear(store, name + ".attn.q", group, dim, dim, rng);
  blk.wk = make_linear(store, name + ".attn.k", group, dim, dim, rng);
  blk.wv = make_linear(store, name + ".attn.v", group, dim, dim, rng);
  blk.wo = make_linear(store, name + ".attn.out", group, dim, dim, rng);
  blk.ln2 = make_layer_norm(store, name + ".ln2", group, dim, rng);
  blk.fc1 = make_linear(store, name + ".mlp.fc1", group, dim, dim * mlp_ratio, rng);
  blk.fc2 = make_linear(store, name + ".mlp.fc2", group, dim * mlp_ratio, dim, rng);
  return blk;
}

template <typename T>
NodeId param_node(Graph<T>& g, Param<T>* p) {
  return g.leaf(&p->value, &p->grad);
}

template <typename T>
NodeId linear(Graph<T>& g, NodeId x, const LinearParams<T>& p) {
  return g.add_row_broadcast(g.matmul(x, param_node(g, p.w)), param_node(g, p.b));
}

// Multi-head scaled dot-product self-attention. When attn_capture is non-null
// it receives the post-softmax attention weights averaged over heads.
template <typename T>
NodeId self_attention(Graph<T>& g, NodeId x, const BlockParams<T>& blk, Mat<T>* attn_capture = nullptr) {
  const int head_dim = blk.dim / blk.heads;
  const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(head_dim));
  const NodeId q = linear(g, x, blk.wq);
  const NodeId k = linear(g, x, blk.wk);
  const NodeId v = linear(g, x, blk.wv);
  std::vector<NodeId> head_outs;
  head_outs.reserve(static_cast<size_t>(blk.heads));
  for (int h = 0; h < blk.heads; ++h) {
    const NodeId qh = g.slice_cols(q, h * head_dim, head_dim);
    const NodeId kh = g.slice_cols(k, h * head_dim, head_dim);
    const NodeId vh = g.slice_cols(v, h * head_dim, head_dim);
    const NodeId scores = g.scale_const(g.matmul_nt(qh, kh), inv_sqrt_dh);
    const NodeId probs = g.softmax_rows(scores);
    if (attn_capture) {
      const Mat<T>& p = g.val(probs);
      if (attn_capture->empty()) *attn_capture = Mat<T>(p.rows, p.cols);
      kernels::axpy(p.size(), T(1) / T(blk.heads), p.data.data(), attn_capture->data.data());
    }
    head_outs.push_back(g.matmul(probs, vh));
  }
  return linear(g, g.concat_cols(head_outs), blk.wo);
}

template <typename T>
NodeId transformer_block(Graph<T>& g, NodeId x, const BlockParams<T>& blk, Mat<T>* attn_capture = nullptr) {
  x = g.add(x, self_attention(g, g.layer_norm(x, param_node(g, blk.ln1.gamma), param_node(g, blk.ln1.beta)), blk,
                              attn_capture));
  const NodeId h = g.layer_norm(x, param_node(g, blk.ln2.gamma), param_node(g, blk.ln2.beta));
  return g.add(x, linear(g, g.gelu(linear(g, h, blk.fc1)), blk.fc2));
}

// Runs `blocks` in order; depth 0 is the identity. capture_layer (if >= 0)
// stores that block's head-averaged attention weights into *attn_capture.
template <typename T>
NodeId transformer_stack(Graph<T>& g, NodeId x, const std::vector<BlockParams<T>>& blocks,
                         int capture_layer = -1, Mat<T>* attn_capture = nullptr) {
  for (size_t i = 0; i < blocks.size(); ++i) {
    Mat<T>* cap = (static_cast<int>(i) == capture_layer) ? attn_capture : nullptr;
    x = transformer_block(g, x, blocks[i], cap);
  }
  return x;
}

}  // namespace cm3ae::nn
