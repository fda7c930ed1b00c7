// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "vitprune/error.hpp"
#include "vitprune/flops.hpp"

using namespace vitprune;

namespace {

double gflops(const VitConfig& c, const std::optional<PruneConfig>& p = {}) {
    return static_cast<double>(flops(c, p).total_flops) / 1e9;
}

}  // namespace

TEST(Flops, BlockFormulas) {
    EXPECT_EQ(mhsa_flops(197, 384), 4ull * 197 * 384 * 384 + 2ull * 197 * 197 * 384);
    EXPECT_EQ(ffn_flops(197, 384, 1536), 2ull * 197 * 384 * 1536);
}

TEST(Flops, UnprunedDeitSmall) {
    EXPECT_NEAR(gflops(VitConfig::deit_small()), 4.54, 0.01);
}

TEST(Flops, PrunedDeitSmall) {
    EXPECT_NEAR(gflops(VitConfig::deit_small(), PruneConfig{}), 2.94, 0.01);
}

TEST(Flops, PrunedDeitTiny) {
    EXPECT_NEAR(gflops(VitConfig::deit_tiny(), PruneConfig{}), 0.78, 0.01);
}

TEST(Flops, PrunedDeitBase) {
    EXPECT_NEAR(gflops(VitConfig::deit_base(), PruneConfig{}), 11.37, 0.01);
}

TEST(Flops, UnprunedClosedForm) {
    for (const auto& c : {VitConfig::deit_tiny(), VitConfig::deit_small(), VitConfig::deit_base()}) {
        const std::uint64_t n = c.num_tokens();
        const std::uint64_t d = c.embed_dim;
        EXPECT_EQ(flops(c).total_flops, c.depth * (12 * n * d * d + 2 * n * n * d));
    }
}

TEST(Flops, TotalIsSumOfLayers) {
    const auto r = flops(VitConfig::deit_small(), PruneConfig{});
    std::uint64_t sum = 0;
    for (const auto& l : r.per_layer) {
        sum += l.total();
    }
    EXPECT_EQ(r.total_flops, sum);
    EXPECT_EQ(r.per_layer.size(), 12u);
    EXPECT_EQ(r.per_layer[3].tokens_mhsa, 197u);
    EXPECT_EQ(r.per_layer[3].tokens_ffn, 139u);
    EXPECT_EQ(r.per_layer[11].tokens_ffn, 69u);
    EXPECT_NEAR(r.reduction_pct, 35.3, 0.1);
}

TEST(Flops, IdentityScheduleEqualsBaseline) {
    const auto r = flops(VitConfig::deit_small(), PruneConfig::identity());
    EXPECT_EQ(r.total_flops, r.baseline_flops);
    EXPECT_EQ(r.reduction_pct, 0.0);
}

TEST(Flops, InvalidLayerRejected) {
    PruneConfig p;
    p.prune_layers = {13};
    EXPECT_THROW(flops(VitConfig::deit_small(), p), ConfigError);
}

TEST(Flops, EmbedAndHeadOptIn) {
    const auto c = VitConfig::deit_small();
    FlopsOptions o;
    o.include_embed_head = true;
    const auto r = flops(c, {}, o);
    EXPECT_EQ(r.embed_flops, 196ull * 3 * 16 * 16 * 384);
    EXPECT_EQ(r.head_flops, 384ull * 1000);
    EXPECT_EQ(r.total_flops, flops(c).total_flops + r.embed_flops + r.head_flops);
}

TEST(Flops, MergeEstimateOptIn) {
    FlopsOptions o;
    o.include_merge = true;
    const auto c = VitConfig::deit_small();
    const auto with = flops(c, PruneConfig{}, o);
    const auto without = flops(c, PruneConfig{});
    EXPECT_GT(with.total_flops, without.total_flops);
    EXPECT_EQ(with.per_layer[0].merge_flops, 0u);
    EXPECT_EQ(with.per_layer[3].merge_flops, 138ull * 138 * 384 + 58ull * 58 * 384);
}

TEST(Flops, StrategyChangesTokenFlow) {
    PruneConfig p;
    p.strategy = Strategy::pack_one;
    const auto r = flops(VitConfig::deit_small(), p);
    EXPECT_EQ(r.per_layer[3].tokens_ffn, 140u);
}
