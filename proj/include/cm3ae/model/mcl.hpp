// Copyright (c) 2026 CM3AE contributors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <vector>

#include "cm3ae/model/encoders.hpp"
#include "cm3ae/model/model.hpp"
#include "cm3ae/nn/graph.hpp"

namespace cm3ae {

// Whole-input representation of a token sequence: the CLS-slot vector, or the
// mean over the non-CLS tokens when mean_pool is set.
template <typename T>
nn::NodeId extract_representation(nn::Graph<T>& g, const TokenSequence<T>& seq, bool mean_pool = false) {
  if (seq.position_ids.empty() || (seq.position_ids[0] != kClsPosition && seq.position_ids[0] != kVoxelClsPosition))
    throw std::logic_error("extract_representation: sequence has no CLS slot");
  if (mean_pool) return g.mean_rows(g.slice_rows(seq.tokens, 1, seq.length() - 1));
  return g.slice_rows(seq.tokens, 0, 1);
}

// Row-wise L2 normalization of a feature batch.
template <typename T>
nn::NodeId normalize_features(nn::Graph<T>& g, nn::NodeId batch) {
  return g.l2_normalize_rows(batch);
}

template <typename T>
struct LogitPair {
  nn::NodeId ab = -1;  // ls * a b^T
  nn::NodeId ba = -1;  // ls * b a^T == (ab)^T
};

// Scaled cosine-similarity logits between two normalized batches and their
// transposed pair.
template <typename T>
LogitPair<T> contrastive_logits(nn::Graph<T>& g, nn::NodeId a, nn::NodeId b, nn::NodeId scale) {
  if (!g.val(a).same_shape(g.val(b))) throw std::invalid_argument("contrastive_logits: batch shape mismatch");
  LogitPair<T> out;
  out.ab = g.mul_scalar_node(scale, g.matmul_nt(a, b));
  out.ba = g.mul_scalar_node(scale, g.matmul_nt(b, a));
  return out;
}

// L_cl = L_re + L_er + L_rv + L_vr over raw RGB/Event/Voxel representation
// batches (normalization applied here). There is no Event-Voxel term.
template <typename T>
nn::NodeId total_contrastive_loss(nn::Graph<T>& g, nn::NodeId rgb_reps, nn::NodeId event_reps, nn::NodeId voxel_reps,
                                  nn::NodeId scale) {
  const nn::NodeId r = normalize_features(g, rgb_reps);
  const nn::NodeId e = normalize_features(g, event_reps);
  const nn::NodeId v = normalize_features(g, voxel_reps);
  const LogitPair<T> re = contrastive_logits<T>(g, r, e, scale);
  const LogitPair<T> rv = contrastive_logits<T>(g, r, v, scale);
  const nn::NodeId l_re = g.info_nce(re.ab);
  const nn::NodeId l_er = g.info_nce(re.ba);
  const nn::NodeId l_rv = g.info_nce(rv.ab);
  const nn::NodeId l_vr = g.info_nce(rv.ba);
  return g.add(g.add(l_re, l_er), g.add(l_rv, l_vr));
}

// L = L_m + L_f + L_cl, unweighted. Pass -1 for disabled terms.
template <typename T>
nn::NodeId total_loss(nn::Graph<T>& g, nn::NodeId loss_m, nn::NodeId loss_f, nn::NodeId loss_cl) {
  nn::NodeId total = loss_m;
  if (loss_f >= 0) total = g.add(total, loss_f);
  if (loss_cl >= 0) total = g.add(total, loss_cl);
  return total;
}

}  // namespace cm3ae
