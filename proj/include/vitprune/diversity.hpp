// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "vitprune/linalg.hpp"
#include "vitprune/vit.hpp"

namespace vitprune {

/// l1 distance from `tokens` to its closest matrix of identical rows 1 z^T.
/// The l1 minimizer z is the column median.
double diversity_score(const Matrix& tokens);

enum class DiversityScope { final_prune_layer, all_layers };

std::string to_string(DiversityScope s);

struct DiversityEntry {
    std::size_t block = 0;
    std::size_t token_count = 0;  // patch tokens measured
    double score = 0.0;
    double score_per_token = 0.0;
};

struct DiversityReport {
    std::vector<DiversityEntry> per_layer;
    DiversityScope measured_at = DiversityScope::final_prune_layer;
};

/// Measures the patch tokens (class token excluded) entering each block's FFN,
/// i.e. after the reduction stage at prune blocks. The trace must have been
/// recorded with TraceOptions::keep_tokens.
///
/// For final_prune_layer scope the last prune block of the trace is used; a
/// trace without pruning falls back to `reference_block` (InvalidInput if absent).
DiversityReport measure(const ForwardTrace& trace, DiversityScope scope,
                        std::optional<std::size_t> reference_block = {});

}  // namespace vitprune
