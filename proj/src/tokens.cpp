// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/tokens.hpp"

#include <numeric>

#include "vitprune/error.hpp"

namespace vitprune {

Matrix TokenSequence::patch_tokens() const {
    std::vector<std::size_t> rows(patch_count());
    std::iota(rows.begin(), rows.end(), 1);
    return tokens.select_rows(rows);
}

TokenSequence TokenSequence::with_identity_provenance(Matrix tokens) {
    if (tokens.rows() == 0) {
        throw InvalidInput("token sequence needs at least the class token");
    }
    TokenSequence s;
    s.provenance.resize(tokens.rows());
    for (std::size_t r = 1; r < tokens.rows(); ++r) {
        s.provenance[r] = {r - 1};
    }
    s.tokens = std::move(tokens);
    return s;
}

bool TokenSequence::partitions(std::size_t num_patches) const {
    if (provenance.size() != tokens.rows() || provenance.empty() || !provenance[0].empty()) {
        return false;
    }
    std::vector<int> owners(num_patches, 0);
    auto mark = [&](std::size_t p) {
        if (p >= num_patches) {
            return false;
        }
        ++owners[p];
        return true;
    };
    for (std::size_t r = 1; r < provenance.size(); ++r) {
        if (provenance[r].empty()) {
            return false;
        }
        for (auto p : provenance[r]) {
            if (!mark(p)) {
                return false;
            }
        }
    }
    for (auto p : discarded) {
        if (!mark(p)) {
            return false;
        }
    }
    for (int c : owners) {
        if (c != 1) {
            return false;
        }
    }
    return true;
}

ClsAttention ClsAttention::from_heads(std::vector<std::vector<double>> per_head) {
    ClsAttention a;
    if (per_head.empty()) {
        return a;
    }
    const std::size_t n = per_head.front().size();
    a.head_mean.assign(n, 0.0);
    for (const auto& h : per_head) {
        if (h.size() != n) {
            throw InvalidInput("attention heads disagree on token count");
        }
        for (std::size_t i = 0; i < n; ++i) {
            a.head_mean[i] += h[i];
        }
    }
    for (double& v : a.head_mean) {
        v /= static_cast<double>(per_head.size());
    }
    a.per_head = std::move(per_head);
    return a;
}

}  // namespace vitprune
