// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/vit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vitprune/error.hpp"

namespace vitprune {

namespace {

std::vector<double> vec(const WeightStore& s, const std::string& name) {
    return s.get(name).data;
}

Matrix mat(const WeightStore& s, const std::string& name) {
    return s.get(name).as_matrix();
}

}  // namespace

VitModel::VitModel(const WeightStore& store) : VitModel(store, VitConfig::from_tag(store.model_tag())) {}

VitModel::VitModel(const WeightStore& store, const VitConfig& config) : m_config(config) {
    m_config.validate();
    if (VitConfig::from_tag(store.model_tag()) != m_config) {
        throw InvalidInput("weight store tag '" + store.model_tag() + "' does not match config " + m_config.tag());
    }
    store.validate();
    const std::size_t d = m_config.embed_dim;

    const Tensor& pw = store.get("patch_embed.proj.weight");
    m_patch_weight = Matrix(d, pw.numel() / d, pw.data);
    m_patch_bias = vec(store, "patch_embed.proj.bias");
    m_cls = vec(store, "cls_token");
    m_pos = mat(store, "pos_embed");

    m_blocks.resize(m_config.depth);
    for (std::size_t b = 0; b < m_config.depth; ++b) {
        auto name = [&](const char* suffix) { return block_tensor_name(b, suffix); };
        BlockWeights& w = m_blocks[b];
        w.norm1_weight = vec(store, name("norm1.weight"));
        w.norm1_bias = vec(store, name("norm1.bias"));
        w.qkv_weight = mat(store, name("attn.qkv.weight"));
        w.qkv_bias = vec(store, name("attn.qkv.bias"));
        w.proj_weight = mat(store, name("attn.proj.weight"));
        w.proj_bias = vec(store, name("attn.proj.bias"));
        w.norm2_weight = vec(store, name("norm2.weight"));
        w.norm2_bias = vec(store, name("norm2.bias"));
        w.fc1_weight = mat(store, name("mlp.fc1.weight"));
        w.fc1_bias = vec(store, name("mlp.fc1.bias"));
        w.fc2_weight = mat(store, name("mlp.fc2.weight"));
        w.fc2_bias = vec(store, name("mlp.fc2.bias"));
    }
    m_norm_weight = vec(store, "norm.weight");
    m_norm_bias = vec(store, "norm.bias");
    m_head_weight = mat(store, "head.weight");
    m_head_bias = vec(store, "head.bias");
}

TokenSequence patch_embed(const Tensor& image, const VitModel& model) {
    const VitConfig& cfg = model.config();
    const std::vector<std::size_t> expected = {cfg.channels, cfg.image_size, cfg.image_size};
    if (image.shape != expected) {
        std::string got;
        for (auto d : image.shape) {
            got += (got.empty() ? "" : "x") + std::to_string(d);
        }
        throw InvalidInput("image shape " + got + " does not match " + std::to_string(cfg.channels) + "x" +
                           std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
    }
    const std::size_t p = cfg.patch_size;
    const std::size_t g = cfg.grid();
    const std::size_t side = cfg.image_size;
    // Patch vectors flattened as (channel, row, col) to match the [D, C, P, P] kernel.
    Matrix patches(cfg.num_patches(), cfg.channels * p * p);
    for (std::size_t gy = 0; gy < g; ++gy) {
        for (std::size_t gx = 0; gx < g; ++gx) {
            auto dst = patches.row(gy * g + gx);
            std::size_t k = 0;
            for (std::size_t c = 0; c < cfg.channels; ++c) {
                for (std::size_t y = 0; y < p; ++y) {
                    for (std::size_t x = 0; x < p; ++x) {
                        dst[k++] = image.data[(c * side + gy * p + y) * side + gx * p + x];
                    }
                }
            }
        }
    }
    const Matrix embedded = linear(patches, model.patch_weight(), model.patch_bias());

    Matrix tokens(cfg.num_tokens(), cfg.embed_dim);
    const Matrix& pos = model.pos_embed();
    for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
        tokens(0, j) = model.cls_token()[j] + pos(0, j);
    }
    for (std::size_t r = 0; r < embedded.rows(); ++r) {
        for (std::size_t j = 0; j < cfg.embed_dim; ++j) {
            tokens(r + 1, j) = embedded(r, j) + pos(r + 1, j);
        }
    }
    return TokenSequence::with_identity_provenance(std::move(tokens));
}

MhsaOutput mhsa(const Matrix& tokens, const BlockWeights& w, const VitConfig& cfg) {
    const std::size_t d_model = cfg.embed_dim;
    if (tokens.cols() != d_model) {
        throw InvalidInput("mhsa: token dim " + std::to_string(tokens.cols()) + " != " + std::to_string(d_model));
    }
    const std::size_t n = tokens.rows();
    const std::size_t hd = cfg.head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    const Matrix normed = layer_norm(tokens, w.norm1_weight, w.norm1_bias, cfg.ln_eps);
    const Matrix qkv = linear(normed, w.qkv_weight, w.qkv_bias);

    Matrix concat(n, d_model);
    Matrix attn(n, n);
    std::vector<std::vector<double>> cls_rows;
    cls_rows.reserve(cfg.heads);
    for (std::size_t h = 0; h < cfg.heads; ++h) {
        const std::size_t qo = h * hd;
        const std::size_t ko = d_model + h * hd;
        const std::size_t vo = 2 * d_model + h * hd;
        for (std::size_t i = 0; i < n; ++i) {
            auto qi = qkv.row(i).subspan(qo, hd);
            for (std::size_t j = 0; j < n; ++j) {
                attn(i, j) = dot(qi, qkv.row(j).subspan(ko, hd)) * scale;
            }
        }
        row_softmax_inplace(attn);
        cls_rows.emplace_back(attn.row(0).begin(), attn.row(0).end());
        for (std::size_t i = 0; i < n; ++i) {
            auto out = concat.row(i).subspan(qo, hd);
            for (std::size_t j = 0; j < n; ++j) {
                const double a = attn(i, j);
                auto vj = qkv.row(j).subspan(vo, hd);
                for (std::size_t k = 0; k < hd; ++k) {
                    out[k] += a * vj[k];
                }
            }
        }
    }

    Matrix out = linear(concat, w.proj_weight, w.proj_bias);
    auto dst = out.data();
    auto src = tokens.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
    return MhsaOutput{std::move(out), ClsAttention::from_heads(std::move(cls_rows))};
}

Matrix ffn(const Matrix& tokens, const BlockWeights& w, const VitConfig& cfg) {
    if (w.fc1_weight.rows() != cfg.hidden_dim()) {
        throw InvalidInput("ffn: hidden dim " + std::to_string(w.fc1_weight.rows()) + " != " +
                           std::to_string(cfg.hidden_dim()));
    }
    const Matrix normed = layer_norm(tokens, w.norm2_weight, w.norm2_bias, cfg.ln_eps);
    Matrix hidden = linear(normed, w.fc1_weight, w.fc1_bias);
    gelu_inplace(hidden);
    Matrix out = linear(hidden, w.fc2_weight, w.fc2_bias);
    auto dst = out.data();
    auto src = tokens.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
    return out;
}

ForwardResult forward(const Tensor& image, const VitModel& model, const std::optional<PruneConfig>& prune,
                      const TraceOptions& options) {
    const VitConfig& cfg = model.config();
    if (prune) {
        prune->validate(cfg.depth);
    }
    ForwardResult result;
    TokenSequence seq = patch_embed(image, model);

    for (std::size_t b = 1; b <= cfg.depth; ++b) {
        const BlockWeights& w = model.blocks()[b - 1];
        BlockTrace bt;
        bt.block = b;
        bt.tokens_mhsa = seq.size();

        MhsaOutput attn_out = mhsa(seq.tokens, w, cfg);
        seq.tokens = std::move(attn_out.tokens);
        if (prune && prune->prunes_at(b)) {
            PruneStats stats;
            seq = prune_layer(seq, attn_out.cls_attention, *prune, &stats);
            bt.prune = stats;
            result.trace.prune_layers.push_back(b);
        }
        bt.tokens_ffn = seq.size();
        if (options.keep_tokens) {
            bt.ffn_input = seq;
        }
        if (options.keep_attention) {
            bt.attention = std::move(attn_out.cls_attention);
        }
        seq.tokens = ffn(seq.tokens, w, cfg);
        result.trace.blocks.push_back(std::move(bt));
    }

    const std::size_t zero = 0;
    const Matrix cls = layer_norm(seq.tokens.select_rows(std::span(&zero, 1)), model.norm_weight(),
                                  model.norm_bias(), cfg.ln_eps);
    const Matrix logits = linear(cls, model.head_weight(), model.head_bias());
    result.logits.assign(logits.row(0).begin(), logits.row(0).end());
    return result;
}

ForwardResult forward(const Tensor& image, const WeightStore& weights, const std::optional<PruneConfig>& prune,
                      const TraceOptions& options) {
    return forward(image, VitModel(weights), prune, options);
}

std::vector<std::size_t> top_k(const std::vector<double>& logits, std::size_t k) {
    std::vector<std::size_t> idx(logits.size());
    std::iota(idx.begin(), idx.end(), 0);
    k = std::min(k, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
                      });
    idx.resize(k);
    return idx;
}

}  // namespace vitprune
