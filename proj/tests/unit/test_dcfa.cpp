#include <cmath>

#include <gtest/gtest.h>

#include "dfir/attention.hpp"
#include "dfir/dcfa.hpp"
#include "dfir/oracles.hpp"

using namespace dfir;

namespace {

ParamStore dksa_params(std::size_t channels, std::uint64_t seed) {
  ParamStore p;
  Rng rng(seed);
  init_dksa_params(p, "", channels, rng);
  return p;
}

// Zeroes every weight whose output is added back onto a residual stream.
void zero_residual_branches(ParamStore& p, const std::string& prefix) {
  p.zero_matching(prefix, "dw.weight");
  p.zero_matching(prefix, "attn.proj");
  p.zero_matching(prefix, "ffn.out");
}

}  // namespace

TEST(DynamicK, GateRule) {
  EXPECT_EQ(k_from_gate(0.0, 16), 8u);
  EXPECT_EQ(k_from_gate(20.0, 16), 16u);
  EXPECT_EQ(k_from_gate(-20.0, 16), 1u);
  EXPECT_EQ(k_from_gate(NAN, 16), 1u);
}

TEST(DynamicK, PooledBiasDrivesK) {
  ParamStore p = dksa_params(8, 1);
  p.zero_matching("gate.conv2");
  const Tensor x = random_tensor({1, 4, 4, 4}, 2);
  for (const auto& [bias, want] : {std::pair{0.0, 8u}, std::pair{20.0, 16u}, std::pair{-20.0, 1u}}) {
    p.get("gate.conv2.bias")[0] = bias;
    EXPECT_EQ(dynamic_k(x, p, "gate."), std::vector<std::size_t>{want});
    EXPECT_EQ(dynamic_k(x, p, "gate."), dynamic_k(x, p, "gate."));
  }
}

TEST(TopK, HandSetScoresPickDiagonal) {
  // Scores q.k / sqrt(2) proportional to [[5, 1], [0, 3]].
  const Tensor q({2, 2}, {5, 1, 0, 3});
  const Tensor k({2, 2}, {1, 0, 0, 1});
  const Tensor v({2, 2}, {1, 2, 3, 4});
  SparseAttnPlan plan;
  const Tensor out = topk_attention(q, k, v, 1, &plan);
  EXPECT_EQ(plan.row_indices(0)[0], 0u);
  EXPECT_EQ(plan.row_indices(1)[0], 1u);
  EXPECT_EQ(plan.row_weights(0)[0], 1.0);
  EXPECT_EQ(plan.row_weights(1)[0], 1.0);
  EXPECT_EQ(out, v);
}

TEST(TopK, TiesBreakToLowestIndex) {
  const std::vector<double> scores{1.0, 3.0, 3.0, 0.5, 3.0};
  EXPECT_EQ(topk_indices(scores, 2), (std::vector<std::uint32_t>{1, 2}));
}

TEST(TopK, FullKMatchesDenseReference) {
  Rng rng(4);
  const Tensor q = random_tensor({3, 5}, rng), k = random_tensor({3, 5}, rng), v = random_tensor({3, 5}, rng);
  EXPECT_LE(max_rel_err(topk_attention(q, k, v, 3), oracle::dense_attention_reference(q, k, v)), 1e-12);
}

TEST(Dksa, SingleTokenAttendsItself) {
  const ParamStore p = dksa_params(8, 3);
  const Tensor x = random_tensor({1, 8, 1, 1}, 4);
  DksaTrace trace;
  const Tensor y = dksa(x, p, {}, "", &trace);
  ASSERT_EQ(trace.plans.size(), 1u);
  EXPECT_EQ(trace.plans[0].weights, std::vector<double>{1.0});

  // With one token the attended half is the value projection of that token.
  NormSpec norm = make_group_norm(4);
  norm.gain = p.get("norm.gain");
  norm.shift = p.get("norm.shift");
  const Tensor normed = normalize(slice_channels(x, 0, 4), norm);
  const Tensor value = conv2d(normed, p.get("v.weight"), p.get("v.bias"));
  const Tensor parts[] = {value, slice_channels(x, 4, 4)};
  const Tensor want = conv2d(concat_channels(parts), p.get("proj.weight"), p.get("proj.bias"));
  EXPECT_LE(max_rel_err(y, want), 1e-14);
}

TEST(Dksa, OddChannelsThrow) {
  const ParamStore p = dksa_params(8, 3);
  EXPECT_THROW(dksa(Tensor({1, 7, 2, 2}), p, {}), ShapeError);
}

TEST(Sglu, ZeroOutputProjectionIsResidual) {
  ParamStore p;
  Rng rng(5);
  init_sglu_params(p, "", 6, rng);
  p.zero_matching("out");
  const Tensor x = random_tensor({2, 6, 3, 4}, 6);
  EXPECT_EQ(sglu(x, p), x);
}

TEST(Sglu, DeterministicWithoutDropout) {
  ParamStore p;
  Rng rng(5);
  init_sglu_params(p, "", 6, rng);
  const Tensor x = random_tensor({1, 6, 3, 3}, 7);
  EXPECT_EQ(sglu(x, p), sglu(x, p));
  const SgluOptions train{0.3, true, 11};
  EXPECT_EQ(sglu(x, p, train), sglu(x, p, train));
  EXPECT_NE(sglu(x, p, train), sglu(x, p));
}

TEST(Sglu, SaturatedGateLeavesBias) {
  ParamStore p;
  Rng rng(5);
  init_sglu_params(p, "", 4, rng);
  // Depthwise taps summing to 9 on a gate stream of -100 push GELU to zero.
  p.zero_matching("gate.weight");
  for (double& b : p.get("gate.bias").data()) b = -100.0;
  for (double& w : p.get("dw.weight").data()) w = 1.0;
  p.zero_matching("dw.bias");
  const Tensor x = random_tensor({1, 4, 3, 3}, 8);
  const Tensor y = sglu(x, p);
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t i = 0; i < 9; ++i) {
      EXPECT_NEAR(y[c * 9 + i], x[c * 9 + i] + p.get("out.bias")[c], 1e-5);
    }
  }
}

TEST(Dafb, ZeroResidualBranchesIsIdentity) {
  ParamStore p;
  Rng rng(9);
  init_dafb_params(p, "", 8, rng);
  zero_residual_branches(p, "");
  const Tensor x = random_tensor({1, 8, 4, 4}, 10);
  EXPECT_EQ(dafb(x, p, {}, {}), x);
}

TEST(Dafb, ShapeAndManualComposition) {
  ParamStore p;
  Rng rng(12);
  init_dafb_params(p, "", 8, rng);
  const Tensor x = random_tensor({2, 8, 5, 7}, 13);
  const Tensor y = dafb(x, p, {}, {});
  EXPECT_EQ(y.shape(), x.shape());

  const Tensor local = conv2d(x, p.get("dw.weight"), Tensor(), {.groups = 8});
  const Tensor h = add(x, channel_affine(local, p.get("bn.gain"), p.get("bn.shift")));
  const Tensor attended = add(h, dksa(h, p, {}, "attn."));
  EXPECT_EQ(sglu(attended, p, {}, "ffn."), y);
}

TEST(DcfaBlock, EmptyChainProjectsBothHalves) {
  DcfaConfig c;
  c.channels = 16;
  c.stack_depth = 0;
  const ParamStore p = init_dcfa_params(c, 1);
  const Tensor x = random_tensor({1, 16, 4, 4}, 2);
  const Tensor projected = conv2d(x, p.get("cv1.weight"), p.get("cv1.bias"));
  EXPECT_EQ(dcfa_block(x, c, p), conv2d(projected, p.get("cv2.weight"), p.get("cv2.bias")));
}

TEST(DcfaBlock, DepthTwoKeepsShape) {
  DcfaConfig c;
  c.channels = 16;
  c.stack_depth = 2;
  const Tensor x = random_tensor({1, 16, 8, 8}, 3);
  EXPECT_EQ(dcfa_block(x, c, init_dcfa_params(c, 4)).shape(), x.shape());
}

TEST(DcfaBlock, ResidualCollapseRepeatsSecondHalf) {
  DcfaConfig c;
  c.channels = 16;
  c.stack_depth = 2;
  ParamStore p = init_dcfa_params(c, 5);
  zero_residual_branches(p, "blocks.");
  const Tensor x = random_tensor({1, 16, 4, 4}, 6);
  const Tensor projected = conv2d(x, p.get("cv1.weight"), p.get("cv1.bias"));
  const Tensor f1 = slice_channels(projected, 0, 8), f2 = slice_channels(projected, 8, 8);
  const Tensor parts[] = {f1, f2, f2, f2};
  const Tensor want = conv2d(concat_channels(parts), p.get("cv2.weight"), p.get("cv2.bias"));
  EXPECT_EQ(dcfa_block(x, c, p), want);
}

TEST(DcfaBlock, ChannelMismatchThrows) {
  DcfaConfig c;
  c.channels = 16;
  const ParamStore p = init_dcfa_params(c, 1);
  EXPECT_THROW(dcfa_block(Tensor({1, 8, 4, 4}), c, p), ShapeError);
}

TEST(DcfaBlock, InvalidConfigsThrow) {
  DcfaConfig c;
  c.channels = 6;
  EXPECT_THROW(c.validate(), ShapeError);
  c.channels = 16;
  c.heads = 3;
  EXPECT_THROW(c.validate(), ShapeError);
}

TEST(DcfaBlock, SeededRunsAreBitIdentical) {
  DcfaConfig c;
  c.channels = 32;
  c.stack_depth = 2;
  const Tensor x = random_tensor({2, 32, 4, 4}, 7);
  EXPECT_EQ(dcfa_block(x, c, init_dcfa_params(c, 8)), dcfa_block(x, c, init_dcfa_params(c, 8)));
}
