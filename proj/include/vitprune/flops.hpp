// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "vitprune/config.hpp"
#include "vitprune/prune.hpp"

namespace vitprune {

// Analytic multiply-accumulate counts per block:
//   MHSA = 4 N D^2 + 2 N^2 D   (qkv + proj, then QK^T and AV)
//   FFN  = 2 N D hidden         (= 8 N D^2 at mlp ratio 4)
// At a prune block MHSA sees the incoming count and FFN the reduced count.

struct FlopsOptions {
    /// Add patch embedding and classifier head.
    bool include_embed_head = false;
    /// Add an estimate of the reduction stage itself (distance / similarity matrices).
    bool include_merge = false;
};

struct LayerFlops {
    std::size_t block = 0;  // 1-based
    std::size_t tokens_mhsa = 0;
    std::size_t tokens_ffn = 0;
    std::uint64_t mhsa_flops = 0;
    std::uint64_t ffn_flops = 0;
    std::uint64_t merge_flops = 0;

    std::uint64_t total() const { return mhsa_flops + ffn_flops + merge_flops; }
};

struct FlopsReport {
    std::vector<LayerFlops> per_layer;
    std::uint64_t embed_flops = 0;
    std::uint64_t head_flops = 0;
    /// Sum of per_layer totals plus embed and head.
    std::uint64_t total_flops = 0;
    /// Same accounting with no reduction stage.
    std::uint64_t baseline_flops = 0;
    double reduction_pct = 0.0;
};

std::uint64_t mhsa_flops(std::size_t tokens, std::size_t dim);
std::uint64_t ffn_flops(std::size_t tokens, std::size_t dim, std::size_t hidden);

/// Throws ConfigError for prune layers outside [1, depth].
FlopsReport flops(const VitConfig& cfg, const std::optional<PruneConfig>& prune = {},
                  const FlopsOptions& options = {});

}  // namespace vitprune
