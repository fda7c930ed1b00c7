// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "vitprune/config.hpp"
#include "vitprune/linalg.hpp"
#include "vitprune/model_io.hpp"
#include "vitprune/prune.hpp"
#include "vitprune/tokens.hpp"

namespace vitprune {

struct BlockWeights {
    std::vector<double> norm1_weight, norm1_bias;
    Matrix qkv_weight;  // [3D, D]: q rows, then k rows, then v rows
    std::vector<double> qkv_bias;
    Matrix proj_weight;  // [D, D]
    std::vector<double> proj_bias;
    std::vector<double> norm2_weight, norm2_bias;
    Matrix fc1_weight;  // [hidden, D]
    std::vector<double> fc1_bias;
    Matrix fc2_weight;  // [D, hidden]
    std::vector<double> fc2_bias;
};

/// Weights unpacked from a WeightStore into compute-ready matrices.
/// Immutable after construction; one instance can serve concurrent forward passes.
class VitModel {
public:
    explicit VitModel(const WeightStore& store);
    VitModel(const WeightStore& store, const VitConfig& config);

    const VitConfig& config() const { return m_config; }
    const std::vector<BlockWeights>& blocks() const { return m_blocks; }

    const Matrix& patch_weight() const { return m_patch_weight; }  // [D, C*P*P]
    const std::vector<double>& patch_bias() const { return m_patch_bias; }
    const std::vector<double>& cls_token() const { return m_cls; }
    const Matrix& pos_embed() const { return m_pos; }  // [N+1, D]
    const std::vector<double>& norm_weight() const { return m_norm_weight; }
    const std::vector<double>& norm_bias() const { return m_norm_bias; }
    const Matrix& head_weight() const { return m_head_weight; }
    const std::vector<double>& head_bias() const { return m_head_bias; }

private:
    VitConfig m_config;
    Matrix m_patch_weight;
    std::vector<double> m_patch_bias;
    std::vector<double> m_cls;
    Matrix m_pos;
    std::vector<BlockWeights> m_blocks;
    std::vector<double> m_norm_weight, m_norm_bias;
    Matrix m_head_weight;
    std::vector<double> m_head_bias;
};

/// Image tensor [C, H, W] -> class token + patch tokens + position embedding.
TokenSequence patch_embed(const Tensor& image, const VitModel& model);

struct MhsaOutput {
    Matrix tokens;
    ClsAttention cls_attention;
};

/// Pre-norm residual multi-head self-attention. Also returns the class-token
/// attention row of every head.
MhsaOutput mhsa(const Matrix& tokens, const BlockWeights& w, const VitConfig& cfg);

/// Pre-norm residual Linear -> GeLU -> Linear.
Matrix ffn(const Matrix& tokens, const BlockWeights& w, const VitConfig& cfg);

struct TraceOptions {
    bool keep_attention = true;
    /// Keep the sequence entering each block's FFN (post-prune at prune blocks).
    bool keep_tokens = false;
};

struct BlockTrace {
    std::size_t block = 0;  // 1-based
    std::size_t tokens_mhsa = 0;
    std::size_t tokens_ffn = 0;
    ClsAttention attention;
    std::optional<TokenSequence> ffn_input;
    std::optional<PruneStats> prune;
};

struct ForwardTrace {
    std::vector<BlockTrace> blocks;
    std::vector<std::size_t> prune_layers;  // layers where a reduction actually ran
};

struct ForwardResult {
    std::vector<double> logits;
    ForwardTrace trace;
};

ForwardResult forward(const Tensor& image, const VitModel& model, const std::optional<PruneConfig>& prune = {},
                      const TraceOptions& options = {});
ForwardResult forward(const Tensor& image, const WeightStore& weights, const std::optional<PruneConfig>& prune = {},
                      const TraceOptions& options = {});

/// Indices of the `k` largest logits, descending (ties to the lower index).
std::vector<std::size_t> top_k(const std::vector<double>& logits, std::size_t k);

}  // namespace vitprune
