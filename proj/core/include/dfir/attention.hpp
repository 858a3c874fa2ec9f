#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dfir/autodiff.hpp"
#include "dfir/tensor.hpp"

namespace dfir {

// Per-query Top-K selection and the masked softmax weights over it.
//
// indices and weights are stored row-major as N x K: row i holds the K key
// positions retained for query i (ascending) and their attention weights.
// Entries of the full N x N attention matrix outside a row's index set are
// exactly zero.
struct SparseAttnPlan {
  std::size_t tokens = 0;  // N
  std::size_t k = 0;       // K, 1 <= K <= N
  std::vector<std::uint32_t> indices;
  std::vector<double> weights;
  // Raw scaled logits q_i . k_j / sqrt(d), N x N. Only filled on request.
  std::vector<double> scores;

  std::span<const std::uint32_t> row_indices(std::size_t i) const {
    return {indices.data() + i * k, k};
  }
  std::span<const double> row_weights(std::size_t i) const { return {weights.data() + i * k, k}; }
  // Materialized N x N attention matrix.
  Tensor dense_weights() const;
};

// Positions of the k largest entries of `scores`, ascending. Ties go to the
// lowest index, so the result is fully determined by the values.
std::vector<std::uint32_t> topk_indices(std::span<const double> scores, std::size_t k);

// Sparse attention for one head. q, k: (N, d); v: (N, dv); returns (N, dv).
// Each query keeps its top_k keys by scaled dot product, softmaxes over them
// and gathers the matching value rows: O(N*d) scoring plus O(K*dv) gathering
// per query. No N x N matrix is allocated unless keep_scores is set.
Tensor topk_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t top_k,
                      SparseAttnPlan* plan = nullptr, bool keep_scores = false);

struct AttentionGrads {
  Tensor q, k, v;
};
AttentionGrads topk_attention_backward(const Tensor& q, const Tensor& k, const Tensor& v,
                                       const SparseAttnPlan& plan, const Tensor& grad_output);

// K = clamp(floor(N * sigmoid(pooled_logit)), 1, N).
std::size_t k_from_gate(double pooled_logit, std::size_t tokens);

namespace ad {

// Multi-head Top-K attention on (B, C, H, W) feature maps. Channels split into
// `heads` groups of C/heads; tokens are the H*W positions. top_k holds one K
// per batch sample. Index selection is piecewise constant: gradients flow
// through the selected entries only. When `plans` is non-null it receives one
// plan per (batch, head).
Var topk_attention(const Var& q, const Var& k, const Var& v, std::size_t heads,
                   const std::vector<std::size_t>& top_k,
                   std::vector<SparseAttnPlan>* plans = nullptr);

}  // namespace ad

}  // namespace dfir
