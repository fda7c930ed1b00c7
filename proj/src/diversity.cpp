// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/diversity.hpp"

#include <algorithm>
#include <cmath>

#include "vitprune/error.hpp"

namespace vitprune {

namespace {

DiversityEntry entry_for(const BlockTrace& bt) {
    if (!bt.ffn_input) {
        throw InvalidInput("trace for block " + std::to_string(bt.block) + " has no token snapshot");
    }
    DiversityEntry e;
    e.block = bt.block;
    e.token_count = bt.ffn_input->patch_count();
    e.score = e.token_count == 0 ? 0.0 : diversity_score(bt.ffn_input->patch_tokens());
    e.score_per_token = e.token_count == 0 ? 0.0 : e.score / static_cast<double>(e.token_count);
    return e;
}

}  // namespace

double diversity_score(const Matrix& tokens) {
    if (tokens.rows() == 0) {
        throw InvalidInput("diversity_score of an empty token matrix");
    }
    const auto median = column_median(tokens);
    // Deviations are summed in sorted order so the score is exactly invariant
    // under row permutation.
    std::vector<double> dev(tokens.rows());
    double r = 0.0;
    for (std::size_t j = 0; j < tokens.cols(); ++j) {
        for (std::size_t i = 0; i < tokens.rows(); ++i) {
            dev[i] = std::abs(tokens(i, j) - median[j]);
        }
        std::sort(dev.begin(), dev.end());
        for (double v : dev) {
            r += v;
        }
    }
    return r;
}

std::string to_string(DiversityScope s) {
    return s == DiversityScope::final_prune_layer ? "final_prune_layer" : "all_layers";
}

DiversityReport measure(const ForwardTrace& trace, DiversityScope scope, std::optional<std::size_t> reference_block) {
    DiversityReport report;
    report.measured_at = scope;
    if (scope == DiversityScope::all_layers) {
        for (const auto& bt : trace.blocks) {
            report.per_layer.push_back(entry_for(bt));
        }
        return report;
    }
    std::size_t block = 0;
    if (!trace.prune_layers.empty()) {
        block = trace.prune_layers.back();
    } else if (reference_block) {
        block = *reference_block;
    } else {
        throw InvalidInput("trace has no prune layer and no reference block was given");
    }
    for (const auto& bt : trace.blocks) {
        if (bt.block == block) {
            report.per_layer.push_back(entry_for(bt));
            return report;
        }
    }
    throw InvalidInput("block " + std::to_string(block) + " not present in trace");
}

}  // namespace vitprune
