// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "vitprune/error.hpp"
#include "vitprune/prune.hpp"
#include "vitprune/selftest.hpp"

using namespace vitprune;

namespace {

std::vector<std::size_t> iota(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), 0);
    return v;
}

ClsAttention uniform_attention(std::size_t heads, std::size_t n) {
    return ClsAttention::from_heads(std::vector<std::vector<double>>(heads, std::vector<double>(n, 1.0 / n)));
}

struct Fixture {
    TokenSequence seq;
    ClsAttention attn;
};

Fixture random_fixture(std::uint64_t seed, std::size_t patches, std::size_t dim, std::size_t heads = 3) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix m(patches + 1, dim);
    for (double& v : m.data()) {
        v = u(rng);
    }
    std::vector<std::vector<double>> rows(heads, std::vector<double>(patches + 1));
    for (auto& r : rows) {
        double s = 0.0;
        for (double& v : r) {
            v = std::exp(3.0 * u(rng));
            s += v;
        }
        for (double& v : r) {
            v /= s;
        }
    }
    return {TokenSequence::with_identity_provenance(std::move(m)), ClsAttention::from_heads(std::move(rows))};
}

}  // namespace

TEST(ImportanceScores, UniformAttention) {
    const auto s = importance_scores(uniform_attention(2, 5));
    ASSERT_EQ(s.values.size(), 4u);
    for (double v : s.values) {
        EXPECT_DOUBLE_EQ(v, 0.2);
    }
}

TEST(ImportanceScores, HeadMeanWithoutRenormalizing) {
    const auto attn = ClsAttention::from_heads({{0.6, 0.1, 0.3}, {0.6, 0.3, 0.1}});
    const auto s = importance_scores(attn);
    EXPECT_NEAR(s.values[0], 0.2, 1e-15);
    EXPECT_NEAR(s.values[1], 0.2, 1e-15);
}

TEST(ImportanceScores, RankingMatchesSummedHeads) {
    auto f = random_fixture(4, 30, 4, 5);
    const auto s = importance_scores(f.attn);
    std::vector<double> summed(30, 0.0);
    for (const auto& h : f.attn.per_head) {
        for (std::size_t i = 0; i < 30; ++i) {
            summed[i] += h[i + 1];
        }
    }
    auto by = [](const std::vector<double>& v) {
        auto idx = iota(v.size());
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
        return idx;
    };
    EXPECT_EQ(by(s.values), by(summed));
}

TEST(KeepCount, CeilingRule) {
    EXPECT_EQ(keep_count(0.7, 196), 138u);
    EXPECT_EQ(keep_count(0.7, 138), 97u);
    EXPECT_EQ(keep_count(0.7, 97), 68u);
    EXPECT_EQ(keep_count(0.5, 196), 98u);
    EXPECT_EQ(keep_count(0.7, 130), 91u);
    EXPECT_EQ(keep_count(1.0, 7), 7u);
    EXPECT_THROW(keep_count(0.0, 10), ConfigError);
    EXPECT_THROW(keep_count(1.5, 10), ConfigError);
}

TEST(Decouple, TopKWithCeiling) {
    // keep 0.6 of 3 -> K = ceil(1.8) = 2
    const auto d = decouple({{0.5, 0.2, 0.3}}, 0.6);
    EXPECT_EQ(d.attentive, (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(d.inattentive, (std::vector<std::size_t>{1}));
    // keep 0.67 of 3 -> K = ceil(2.01) = 3 keeps everything
    EXPECT_TRUE(decouple({{0.5, 0.2, 0.3}}, 0.67).inattentive.empty());
}

TEST(Decouple, FullKeepRate) {
    EXPECT_TRUE(decouple({{0.1, 0.4, 0.2, 0.3}}, 1.0).inattentive.empty());
}

TEST(Decouple, TiesGoToLowerIndex) {
    const auto d = decouple({{0.25, 0.25, 0.25, 0.25}}, 0.5);
    EXPECT_EQ(d.attentive, (std::vector<std::size_t>{0, 1}));
}

TEST(Decouple, ScaleInvariant) {
    auto f = random_fixture(8, 40, 3);
    auto s = importance_scores(f.attn);
    auto scaled = s;
    for (double& v : scaled.values) {
        v *= 37.5;
    }
    const auto a = decouple(s, 0.45);
    const auto b = decouple(scaled, 0.45);
    EXPECT_EQ(a.attentive, b.attentive);
    EXPECT_EQ(a.inattentive, b.inattentive);
}

TEST(MatchAttentive, MostSimilarPairFirst) {
    const auto m = match_attentive(Matrix{{1, 0}, {1, 0.01}, {0, 1}}, 1);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_EQ(m.pairs[0], (std::pair<std::size_t, std::size_t>{0, 1}));
    EXPECT_EQ(m.unmatched, std::vector<std::size_t>{2});
    EXPECT_FALSE(m.clamped);
}

TEST(MatchAttentive, ZeroPairs) {
    const auto m = match_attentive(Matrix{{1, 0}, {1, 0.01}, {0, 1}}, 0);
    EXPECT_TRUE(m.pairs.empty());
    EXPECT_EQ(m.unmatched, (std::vector<std::size_t>{0, 1, 2}));
}

TEST(MatchAttentive, PigeonholeClamp) {
    const auto m = match_attentive(Matrix{{1, 0}, {1, 0.01}, {0, 1}}, 2);
    EXPECT_EQ(m.pairs.size(), 1u);
    EXPECT_TRUE(m.clamped);
}

TEST(MatchAttentive, DisjointGreedy) {
    // (0,1) and (0,2) are both very similar; greedy must not reuse token 0.
    const auto m = match_attentive(Matrix{{1, 0}, {1, 0.01}, {1, 0.02}, {0, 1}, {0.01, 1}}, 2);
    ASSERT_EQ(m.pairs.size(), 2u);
    EXPECT_EQ(m.pairs[0], (std::pair<std::size_t, std::size_t>{1, 2}));
    EXPECT_EQ(m.pairs[1], (std::pair<std::size_t, std::size_t>{3, 4}));
    EXPECT_EQ(m.unmatched, std::vector<std::size_t>{0});
}

TEST(MatchAttentive, SimilarityTieUsesLexicographicPair) {
    const auto m = match_attentive(Matrix{{1, 0}, {1, 0}, {1, 0}, {1, 0}}, 1);
    EXPECT_EQ(m.pairs[0], (std::pair<std::size_t, std::size_t>{0, 1}));
}

TEST(MatchAttentive, ZeroNormRejected) {
    EXPECT_THROW(match_attentive(Matrix{{1, 0}, {0, 0}}, 1), InvalidInput);
}

TEST(WeightedMerge, IdenticalTokensExact) {
    const Matrix t{{0.3, -7.1, 2.0}, {0.3, -7.1, 2.0}, {0.3, -7.1, 2.0}};
    const std::vector<double> s{0.1, 0.7, 0.13};
    const auto out = weighted_merge(t, {{0, 1, 2}}, s, WeightMode::normalized);
    EXPECT_EQ(out.rows, (Matrix{{0.3, -7.1, 2.0}}));
}

TEST(WeightedMerge, NormalizedWeights) {
    const std::vector<double> s{1, 3};
    EXPECT_EQ(weighted_merge(Matrix{{0}, {2}}, {{0, 1}}, s, WeightMode::normalized).rows, (Matrix{{1.5}}));
}

TEST(WeightedMerge, RawWeightsFollowTheLiteralSum) {
    const std::vector<double> s{1, 3};
    EXPECT_EQ(weighted_merge(Matrix{{0}, {2}}, {{0, 1}}, s, WeightMode::raw).rows, (Matrix{{6}}));
}

TEST(WeightedMerge, SingletonsUnchanged) {
    const Matrix t{{1, 2}, {3, 4}, {5, 6}};
    const std::vector<double> s{0.2, 0.5, 0.3};
    EXPECT_EQ(weighted_merge(t, {{0}, {1}, {2}}, s, WeightMode::normalized).rows, t);
}

TEST(WeightedMerge, ZeroScoreGroupFallsBackToMean) {
    const std::vector<double> s{0, 0, 1};
    const auto out = weighted_merge(Matrix{{0}, {4}, {9}}, {{0, 1}, {2}}, s, WeightMode::normalized);
    EXPECT_EQ(out.rows(0, 0), 2.0);
    EXPECT_EQ(out.mean_fallback_groups, std::vector<std::size_t>{0});
}

TEST(WeightedMerge, RejectsOverlappingGroups) {
    const std::vector<double> s{1, 1};
    EXPECT_THROW(weighted_merge(Matrix{{0}, {1}}, {{0, 1}, {1}}, s, WeightMode::normalized), InvalidInput);
}

TEST(WeightedMerge, PropertySuite) {
    const auto r = selftest::check_merge_properties(77, 200);
    EXPECT_TRUE(r.passed) << r.detail;
}

TEST(ResolveCounts, AutoKeepsCountAtK) {
    PruneConfig c;
    const auto r = resolve_counts(c, 196);
    EXPECT_EQ(r.keep, 138u);
    EXPECT_EQ(r.pairs, 10u);  // round(0.05 * 196)
    EXPECT_EQ(r.clusters, 10u);
    EXPECT_EQ(r.output, 138u);
}

TEST(ResolveCounts, AutoClampsWhenFewInattentive) {
    PruneConfig c;
    c.keep_rate = 0.99;
    const auto r = resolve_counts(c, 196);
    EXPECT_EQ(r.keep, 195u);
    EXPECT_EQ(r.pairs, 1u);
    EXPECT_EQ(r.clusters, 1u);
    EXPECT_EQ(r.output, 195u);
    c.keep_rate = 1.0;
    const auto full = resolve_counts(c, 196);
    EXPECT_EQ(full.pairs, 0u);
    EXPECT_EQ(full.output, 196u);
}

TEST(ResolveCounts, ExplicitPairsAtOrAboveKRejected) {
    PruneConfig c;
    c.keep_rate = 0.1;
    c.pair_count = 2;  // K = ceil(0.2) = 1
    EXPECT_THROW(resolve_counts(c, 2), ConfigError);
}

TEST(ResolveCounts, StrategyCounts) {
    PruneConfig c;
    c.keep_rate = 0.5;
    for (auto s : {Strategy::importance_only, Strategy::diversity_only, Strategy::avg_pool, Strategy::max_pool}) {
        c.strategy = s;
        EXPECT_EQ(resolve_counts(c, 20).output, 10u) << to_string(s);
    }
    c.strategy = Strategy::pack_one;
    EXPECT_EQ(resolve_counts(c, 20).output, 11u);
    c.strategy = Strategy::decouple_merge;
    c.pair_count = 3;
    c.cluster_count = 5;
    EXPECT_EQ(resolve_counts(c, 20).output, 12u);
}

TEST(PruneLayer, IdentityForEveryStrategy) {
    auto f = random_fixture(5, 25, 6);
    for (auto s : {Strategy::none, Strategy::importance_only, Strategy::pack_one, Strategy::diversity_only,
                   Strategy::decouple_merge, Strategy::avg_pool, Strategy::max_pool}) {
        PruneConfig c = PruneConfig::identity();
        c.strategy = s;
        const auto out = prune_layer(f.seq, f.attn, c);
        EXPECT_EQ(out.tokens, f.seq.tokens) << to_string(s);
        EXPECT_EQ(out.provenance, f.seq.provenance) << to_string(s);
    }
}

TEST(PruneLayer, AutoOn196PatchesKeeps138) {
    auto f = random_fixture(6, 196, 8);
    PruneConfig c;
    PruneStats stats;
    const auto out = prune_layer(f.seq, f.attn, c, &stats);
    EXPECT_EQ(out.patch_count(), 138u);
    EXPECT_EQ(stats.counts.pairs, 10u);
    EXPECT_FALSE(stats.clamped);
    EXPECT_TRUE(out.partitions(196));
}

TEST(PruneLayer, CountLawForExplicitCounts) {
    auto f = random_fixture(7, 60, 5);
    for (std::size_t q : {0u, 1u, 4u, 9u}) {
        for (std::size_t cl : {0u, 1u, 3u, 7u}) {
            PruneConfig c;
            c.keep_rate = 0.6;
            c.pair_count = q;
            c.cluster_count = cl;
            const auto out = prune_layer(f.seq, f.attn, c);
            EXPECT_EQ(out.patch_count(), 36 - q + cl);
            EXPECT_TRUE(out.partitions(60));
        }
    }
}

TEST(PruneLayer, OutputOrdering) {
    // Patch tokens, scores and embeddings chosen so the result is hand-checkable.
    Matrix m{{9, 9},  // class
             {1, 0},     {0, 1},  {1, 0.01}, {5, 5}, {-1, -1}, {-1.1, -1}};
    const auto seq = TokenSequence::with_identity_provenance(m);
    // patch scores: 0.30 0.20 0.25 0.05 0.10 0.08 (class entry 0.02)
    const auto attn = ClsAttention::from_heads({{0.02, 0.30, 0.20, 0.25, 0.05, 0.10, 0.08}});
    PruneConfig c;
    c.keep_rate = 0.5;  // K = 3 of 6: patches 0, 2, 1
    c.pair_count = 1;   // pair (0, 2)
    c.cluster_count = 2;
    const auto out = prune_layer(seq, attn, c);
    ASSERT_EQ(out.size(), 1u + 2u + 2u);
    EXPECT_EQ(out.provenance[1], (std::vector<std::size_t>{0, 2}));  // pair led by patch 0
    EXPECT_EQ(out.provenance[2], (std::vector<std::size_t>{1}));
    EXPECT_NEAR(out.tokens(1, 1), 0.25 / 0.55 * 0.01, 1e-15);
    // Inattentive 3,4,5: density dominates, so 4 and 5 become centers and the
    // outlier 3 joins its nearest one.
    EXPECT_EQ(out.provenance[3], (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(out.provenance[4], (std::vector<std::size_t>{5}));
}

TEST(PruneLayer, ImportanceOnlyDropsIntoDiscarded) {
    auto f = random_fixture(9, 30, 4);
    PruneConfig c;
    c.strategy = Strategy::importance_only;
    c.keep_rate = 0.4;
    const auto out = prune_layer(f.seq, f.attn, c);
    EXPECT_EQ(out.patch_count(), 12u);
    EXPECT_EQ(out.discarded.size(), 18u);
    EXPECT_TRUE(out.partitions(30));
}

TEST(PruneLayer, PoolingWindows) {
    Matrix m{{0, 0}, {1, 2}, {3, -2}, {5, 6}, {7, 1}, {0, 0}};
    const auto seq = TokenSequence::with_identity_provenance(m);
    const auto attn = ClsAttention::from_heads({std::vector<double>(6, 1.0 / 6)});
    PruneConfig c;
    c.keep_rate = 0.4;  // K = 2 windows over 5 patches: [0,2) and [2,5)
    c.strategy = Strategy::avg_pool;
    const auto avg = prune_layer(seq, attn, c);
    EXPECT_EQ(avg.tokens, (Matrix{{0, 0}, {2, 0}, {4, 7.0 / 3.0}}));
    c.strategy = Strategy::max_pool;
    const auto mx = prune_layer(seq, attn, c);
    EXPECT_EQ(mx.tokens, (Matrix{{0, 0}, {3, 2}, {7, 6}}));
    EXPECT_EQ(mx.provenance[2], (std::vector<std::size_t>{2, 3, 4}));
}

TEST(PruneLayer, DiversityOnlyIgnoresScores) {
    auto f = random_fixture(10, 24, 3);
    PruneConfig c;
    c.strategy = Strategy::diversity_only;
    c.keep_rate = 0.25;
    const auto a = prune_layer(f.seq, f.attn, c);
    const auto b = prune_layer(f.seq, uniform_attention(3, 25), c);
    EXPECT_EQ(a.patch_count(), 6u);
    EXPECT_EQ(a.tokens, b.tokens);
    EXPECT_TRUE(a.partitions(24));
}

TEST(PruneLayer, PackOneEqualsSingleClusterDecoupleMerge) {
    const auto r = selftest::check_ablation_consistency(99, 150);
    EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PruneLayer, PermutationEquivariant) {
    auto f = random_fixture(12, 20, 4);
    std::vector<std::size_t> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(3);
    std::shuffle(perm.begin(), perm.end(), rng);

    Matrix pm(21, 4);
    std::vector<std::vector<double>> heads(f.attn.heads(), std::vector<double>(21));
    for (std::size_t h = 0; h < f.attn.heads(); ++h) {
        heads[h][0] = f.attn.per_head[h][0];
    }
    std::copy(f.seq.tokens.row(0).begin(), f.seq.tokens.row(0).end(), pm.row(0).begin());
    for (std::size_t i = 0; i < 20; ++i) {
        auto src = f.seq.tokens.row(perm[i] + 1);
        std::copy(src.begin(), src.end(), pm.row(i + 1).begin());
        for (std::size_t h = 0; h < f.attn.heads(); ++h) {
            heads[h][i + 1] = f.attn.per_head[h][perm[i] + 1];
        }
    }
    TokenSequence ps = TokenSequence::with_identity_provenance(pm);
    for (std::size_t i = 0; i < 20; ++i) {
        ps.provenance[i + 1] = {perm[i]};
    }
    PruneConfig c;
    c.keep_rate = 0.5;
    const auto a = prune_layer(f.seq, f.attn, c);
    const auto b = prune_layer(ps, ClsAttention::from_heads(heads), c);
    // Same groups of original patches, same merged embeddings (order may differ
    // only where tie-breaking refers to positions).
    std::map<std::vector<std::size_t>, std::vector<double>> ga, gb;
    for (std::size_t r = 1; r < a.size(); ++r) {
        ga[a.provenance[r]].assign(a.tokens.row(r).begin(), a.tokens.row(r).end());
    }
    for (std::size_t r = 1; r < b.size(); ++r) {
        gb[b.provenance[r]].assign(b.tokens.row(r).begin(), b.tokens.row(r).end());
    }
    ASSERT_EQ(ga.size(), gb.size());
    for (const auto& [k, v] : ga) {
        ASSERT_TRUE(gb.count(k));
        for (std::size_t j = 0; j < v.size(); ++j) {
            EXPECT_NEAR(v[j], gb[k][j], 1e-12);
        }
    }
}

TEST(PruneConfig, Validation) {
    PruneConfig c;
    EXPECT_NO_THROW(c.validate(12));
    c.prune_layers = {4, 4};
    EXPECT_THROW(c.validate(12), ConfigError);
    c.prune_layers = {0};
    EXPECT_THROW(c.validate(12), ConfigError);
    c.prune_layers = {13};
    EXPECT_THROW(c.validate(12), ConfigError);
    c.prune_layers = {4};
    c.keep_rate = 0.0;
    EXPECT_THROW(c.validate(12), ConfigError);
    EXPECT_EQ(parse_strategy("pack_one"), Strategy::pack_one);
    EXPECT_THROW(parse_strategy("kmeans"), ConfigError);
}
