// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "vitprune/linalg.hpp"

namespace vitprune {

/// Token embeddings flowing through the blocks. Row 0 is always the class token.
///
/// `provenance[r]` lists the original patch indices that token r stands for
/// (empty for the class token). Patches dropped outright by a strategy end up
/// in `discarded`, so current provenance plus `discarded` always partitions
/// the original patch set.
struct TokenSequence {
    Matrix tokens;
    std::vector<std::vector<std::size_t>> provenance;
    std::vector<std::size_t> discarded;

    std::size_t size() const { return tokens.rows(); }
    std::size_t patch_count() const { return tokens.rows() == 0 ? 0 : tokens.rows() - 1; }

    /// Patch token rows only (class token removed).
    Matrix patch_tokens() const;

    /// Fresh sequence where row r > 0 owns original patch r - 1.
    static TokenSequence with_identity_provenance(Matrix tokens);

    /// True when provenance plus discarded covers 0..num_patches-1 exactly once.
    bool partitions(std::size_t num_patches) const;
};

/// Class-token attention rows from one MHSA call.
struct ClsAttention {
    std::vector<std::vector<double>> per_head;
    std::vector<double> head_mean;

    std::size_t heads() const { return per_head.size(); }
    std::size_t tokens() const { return head_mean.size(); }

    static ClsAttention from_heads(std::vector<std::vector<double>> per_head);
};

}  // namespace vitprune
