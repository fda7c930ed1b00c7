// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vitprune/error.hpp"
#include "vitprune/fixtures.hpp"
#include "vitprune/selftest.hpp"
#include "vitprune/vit.hpp"

using namespace vitprune;

namespace {

VitConfig tiny_geometry(std::size_t image, std::size_t patch) {
    VitConfig c = selftest::small_config();
    c.image_size = image;
    c.patch_size = patch;
    c.embed_dim = 8;
    c.heads = 2;
    c.depth = 2;
    return c;
}

Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix m(r, c);
    for (double& v : m.data()) {
        v = u(rng);
    }
    return m;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (double& x : v) {
        x = u(rng);
    }
    return v;
}

BlockWeights random_block(std::uint64_t seed, const VitConfig& c) {
    std::mt19937_64 rng(seed);
    const std::size_t d = c.embed_dim;
    const std::size_t h = c.hidden_dim();
    BlockWeights w;
    w.norm1_weight = random_vec(rng, d);
    w.norm1_bias = random_vec(rng, d);
    w.qkv_weight = random_matrix(rng, 3 * d, d);
    w.qkv_bias = random_vec(rng, 3 * d);
    w.proj_weight = random_matrix(rng, d, d);
    w.proj_bias = random_vec(rng, d);
    w.norm2_weight = random_vec(rng, d);
    w.norm2_bias = random_vec(rng, d);
    w.fc1_weight = random_matrix(rng, h, d);
    w.fc1_bias = random_vec(rng, h);
    w.fc2_weight = random_matrix(rng, d, h);
    w.fc2_bias = random_vec(rng, d);
    return w;
}

void zero(Matrix& m) {
    for (double& v : m.data()) {
        v = 0.0;
    }
}

void zero(std::vector<double>& v) {
    std::fill(v.begin(), v.end(), 0.0);
}

}  // namespace

TEST(PatchEmbed, TokenCountFor224By16) {
    const auto cfg = tiny_geometry(224, 16);
    const VitModel model(random_weights(cfg, 1));
    const auto seq = patch_embed(random_image(cfg, 2), model);
    EXPECT_EQ(seq.size(), 197u);
    EXPECT_EQ(seq.tokens.cols(), 8u);
    EXPECT_TRUE(seq.partitions(196));
}

TEST(PatchEmbed, ZeroImageAndZeroEmbeddingGivesPositionRows) {
    const auto cfg = tiny_geometry(32, 8);
    auto store = random_weights(cfg, 3);
    for (const char* name : {"cls_token", "patch_embed.proj.bias"}) {
        auto t = store.get(name);
        zero(t.data);
        store.put(name, t);
    }
    const VitModel model(store);
    Tensor image{{3, 32, 32}, std::vector<double>(3 * 32 * 32, 0.0)};
    const auto seq = patch_embed(image, model);
    EXPECT_EQ(seq.tokens, model.pos_embed());
}

TEST(PatchEmbed, PatchOrderIsRowMajorOverTheGrid) {
    auto cfg = tiny_geometry(8, 4);
    cfg.channels = 1;
    auto store = random_weights(cfg, 4);
    // Kernel picks pixel (y=1, x=2) of each patch into every output channel.
    Tensor w = store.get("patch_embed.proj.weight");
    zero(w.data);
    for (std::size_t d = 0; d < cfg.embed_dim; ++d) {
        w.data[d * 16 + 1 * 4 + 2] = 1.0;
    }
    store.put("patch_embed.proj.weight", w);
    for (const char* name : {"patch_embed.proj.bias", "pos_embed", "cls_token"}) {
        auto t = store.get(name);
        zero(t.data);
        store.put(name, t);
    }
    Tensor image{{1, 8, 8}, std::vector<double>(64)};
    for (std::size_t i = 0; i < 64; ++i) {
        image.data[i] = static_cast<double>(i);
    }
    const auto seq = patch_embed(image, VitModel(store));
    EXPECT_EQ(seq.tokens(1, 0), 10.0);  // patch (0,0): row 1 col 2
    EXPECT_EQ(seq.tokens(2, 0), 14.0);  // patch (0,1)
    EXPECT_EQ(seq.tokens(3, 0), 42.0);  // patch (1,0)
    EXPECT_EQ(seq.tokens(4, 0), 46.0);
}

TEST(PatchEmbed, WrongImageShapeRejected) {
    const auto cfg = tiny_geometry(224, 16);
    const VitModel model(random_weights(cfg, 1));
    Tensor image{{3, 225, 224}, std::vector<double>(3 * 225 * 224, 0.0)};
    EXPECT_THROW(patch_embed(image, model), InvalidInput);
}

TEST(Mhsa, ZeroValueAndProjectionIsIdentity) {
    const auto cfg = tiny_geometry(16, 4);
    auto w = random_block(5, cfg);
    zero(w.proj_weight);
    zero(w.proj_bias);
    std::mt19937_64 rng(6);
    const Matrix x = random_matrix(rng, 7, 8);
    EXPECT_EQ(mhsa(x, w, cfg).tokens, x);
}

TEST(Mhsa, ZeroQueryKeyGivesUniformAttention) {
    const auto cfg = tiny_geometry(16, 4);
    auto w = random_block(7, cfg);
    for (std::size_t r = 0; r < 2 * cfg.embed_dim; ++r) {
        for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
            w.qkv_weight(r, c) = 0.0;
        }
        w.qkv_bias[r] = 0.0;
    }
    std::mt19937_64 rng(8);
    const auto out = mhsa(random_matrix(rng, 5, 8), w, cfg);
    ASSERT_EQ(out.cls_attention.heads(), 2u);
    for (const auto& row : out.cls_attention.per_head) {
        for (double a : row) {
            EXPECT_NEAR(a, 0.2, 1e-15);
        }
    }
}

TEST(Mhsa, MatchesPerHeadConstruction) {
    const auto cfg = tiny_geometry(16, 4);
    const auto w = random_block(9, cfg);
    std::mt19937_64 rng(10);
    const Matrix x = random_matrix(rng, 6, 8);
    const std::size_t n = 6, d = 8, hd = 4;

    Matrix normed(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        double mean = 0.0, var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            mean += x(i, j) / d;
        }
        for (std::size_t j = 0; j < d; ++j) {
            var += (x(i, j) - mean) * (x(i, j) - mean) / d;
        }
        for (std::size_t j = 0; j < d; ++j) {
            normed(i, j) = (x(i, j) - mean) / std::sqrt(var + cfg.ln_eps) * w.norm1_weight[j] + w.norm1_bias[j];
        }
    }
    auto project = [&](std::size_t block, std::size_t head) {
        Matrix m(n, hd);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < hd; ++k) {
                const std::size_t r = block * d + head * hd + k;
                double s = w.qkv_bias[r];
                for (std::size_t j = 0; j < d; ++j) {
                    s += w.qkv_weight(r, j) * normed(i, j);
                }
                m(i, k) = s;
            }
        }
        return m;
    };
    Matrix concat(n, d);
    std::vector<std::vector<double>> cls(2);
    for (std::size_t h = 0; h < 2; ++h) {
        const Matrix q = project(0, h), k = project(1, h), v = project(2, h);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> a(n);
            double mx = -1e300, z = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t t = 0; t < hd; ++t) {
                    s += q(i, t) * k(j, t);
                }
                a[j] = s / 2.0;
                mx = std::max(mx, a[j]);
            }
            for (double& e : a) {
                e = std::exp(e - mx);
                z += e;
            }
            for (double& e : a) {
                e /= z;
            }
            if (i == 0) {
                cls[h] = a;
            }
            for (std::size_t t = 0; t < hd; ++t) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    s += a[j] * v(j, t);
                }
                concat(i, h * hd + t) = s;
            }
        }
    }
    const auto out = mhsa(x, w, cfg);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < d; ++o) {
            double s = w.proj_bias[o] + x(i, o);
            for (std::size_t j = 0; j < d; ++j) {
                s += w.proj_weight(o, j) * concat(i, j);
            }
            EXPECT_NEAR(out.tokens(i, o), s, 1e-9);
        }
    }
    for (std::size_t h = 0; h < 2; ++h) {
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_NEAR(out.cls_attention.per_head[h][j], cls[h][j], 1e-12);
        }
    }
}

TEST(Ffn, ZeroOutputProjectionIsIdentity) {
    const auto cfg = tiny_geometry(16, 4);
    auto w = random_block(11, cfg);
    zero(w.fc2_weight);
    zero(w.fc2_bias);
    std::mt19937_64 rng(12);
    const Matrix x = random_matrix(rng, 4, 8);
    EXPECT_EQ(ffn(x, w, cfg), x);
}

TEST(Ffn, ZeroInputZeroBiasGivesZero) {
    const auto cfg = tiny_geometry(16, 4);
    auto w = random_block(13, cfg);
    zero(w.norm2_bias);
    zero(w.fc1_bias);
    zero(w.fc2_bias);
    const Matrix x(3, 8);
    EXPECT_EQ(ffn(x, w, cfg), Matrix(3, 8));
}

TEST(Ffn, HandComputedTwoDimensionalCase) {
    VitConfig cfg = tiny_geometry(16, 4);
    cfg.embed_dim = 2;
    cfg.heads = 1;
    cfg.mlp_ratio = 1.0;
    cfg.ln_eps = 1e-12;
    BlockWeights w;
    w.norm2_weight = {1, 1};
    w.norm2_bias = {0, 0};
    w.fc1_weight = Matrix::identity(2);
    w.fc1_bias = {0, 0};
    w.fc2_weight = Matrix{{1, 2}, {3, 4}};
    w.fc2_bias = {0.5, -0.5};
    const Matrix out = ffn(Matrix{{1, -1}}, w, cfg);
    EXPECT_NEAR(out(0, 0), 2.0240342382050036, 1e-9);
    EXPECT_NEAR(out(0, 1), 0.38941322247800847, 1e-9);
}

TEST(Forward, IdentityScheduleMatchesUnpruned) {
    const auto cfg = selftest::small_config();
    const VitModel model(random_weights(cfg, 21));
    const auto image = random_image(cfg, 22);
    const auto base = forward(image, model);
    const auto ident = forward(image, model, PruneConfig::identity());
    ASSERT_EQ(base.logits.size(), cfg.num_classes);
    for (std::size_t i = 0; i < base.logits.size(); ++i) {
        EXPECT_NEAR(ident.logits[i], base.logits[i], 1e-6 * std::max(1.0, std::abs(base.logits[i])));
    }
}

TEST(Forward, DefaultScheduleTokenCountsOn196Patches) {
    VitConfig cfg = selftest::small_config();
    cfg.image_size = 56;  // 14 x 14 grid of 4-pixel patches
    const VitModel model(random_weights(cfg, 23));
    const auto r = forward(random_image(cfg, 24), model, PruneConfig{});
    ASSERT_EQ(r.trace.blocks.size(), 12u);
    std::vector<std::size_t> ffn_counts;
    for (const auto& b : r.trace.blocks) {
        ffn_counts.push_back(b.tokens_ffn);
    }
    EXPECT_EQ(ffn_counts, (std::vector<std::size_t>{197, 197, 197, 139, 139, 139, 98, 98, 98, 69, 69, 69}));
    EXPECT_EQ(r.trace.blocks[3].tokens_mhsa, 197u);
    EXPECT_EQ(r.trace.blocks[6].tokens_mhsa, 139u);
    EXPECT_EQ(r.trace.prune_layers, (std::vector<std::size_t>{4, 7, 10}));
    for (double v : r.logits) {
        EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Forward, AllStrategiesProduceFiniteLogits) {
    const auto cfg = selftest::small_config();
    const VitModel model(random_weights(cfg, 25));
    const auto image = random_image(cfg, 26);
    for (auto s : {Strategy::importance_only, Strategy::pack_one, Strategy::diversity_only,
                   Strategy::decouple_merge, Strategy::avg_pool, Strategy::max_pool}) {
        PruneConfig p;
        p.strategy = s;
        p.keep_rate = 0.5;
        const auto r = forward(image, model, p);
        ASSERT_EQ(r.logits.size(), cfg.num_classes);
        for (double v : r.logits) {
            EXPECT_TRUE(std::isfinite(v)) << to_string(s);
        }
    }
}

TEST(Forward, TraceKeepsFfnInputsOnRequest) {
    const auto cfg = selftest::small_config();
    const VitModel model(random_weights(cfg, 27));
    TraceOptions opts;
    opts.keep_tokens = true;
    const auto r = forward(random_image(cfg, 28), model, PruneConfig{}, opts);
    for (const auto& b : r.trace.blocks) {
        ASSERT_TRUE(b.ffn_input.has_value());
        EXPECT_EQ(b.ffn_input->size(), b.tokens_ffn);
        EXPECT_TRUE(b.ffn_input->partitions(cfg.num_patches()));
        EXPECT_EQ(b.prune.has_value(), b.block == 4 || b.block == 7 || b.block == 10);
    }
}

TEST(Forward, WeightStoreOverloadValidates) {
    const auto cfg = selftest::small_config();
    auto store = random_weights(cfg, 29);
    store.erase("blocks.0.mlp.fc1.bias");
    EXPECT_THROW(forward(random_image(cfg, 30), store), IncompleteCheckpoint);
}

TEST(TopK, OrderAndTies) {
    EXPECT_EQ(top_k({0.1, 0.5, 0.5, 0.2}, 3), (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(top_k({1.0, 2.0}, 5).size(), 2u);
}
