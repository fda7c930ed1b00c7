// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vitprune/linalg.hpp"
#include "vitprune/tokens.hpp"

namespace vitprune {

enum class Strategy {
    none,
    importance_only,  // keep the top-K attentive tokens, drop the rest
    pack_one,         // keep top-K, fuse all inattentive tokens into one
    diversity_only,   // cluster every patch token into K groups, ignore importance
    decouple_merge,   // match attentive pairs + cluster inattentive tokens
    avg_pool,
    max_pool,
};

enum class WeightMode { normalized, raw };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);
std::string to_string(WeightMode m);
WeightMode parse_weight_mode(const std::string& s);

struct PruneConfig {
    Strategy strategy = Strategy::decouple_merge;
    /// 1-based block indices; the reduction runs between MHSA and FFN.
    std::vector<std::size_t> prune_layers{4, 7, 10};
    double keep_rate = 0.7;
    /// nullopt selects the automatic count.
    std::optional<std::size_t> pair_count;
    /// nullopt means "same as the resolved pair count".
    std::optional<std::size_t> cluster_count;
    WeightMode weight_mode = WeightMode::normalized;

    /// Throws ConfigError for keep_rate outside (0, 1] or bad layer lists.
    void validate(std::size_t depth) const;
    bool prunes_at(std::size_t block) const;

    /// Keep rate 1, zero pairs: every strategy reduces to the identity.
    static PruneConfig identity();
};

struct ImportanceScores {
    std::vector<double> values;
};

/// Head-mean class attention for the patch tokens (class self-entry dropped, no renormalization).
ImportanceScores importance_scores(const ClsAttention& attn);

/// ceil(keep_rate * n). Throws ConfigError if the result is zero.
std::size_t keep_count(double keep_rate, std::size_t n);

struct Decoupling {
    std::vector<std::size_t> attentive;    // ascending
    std::vector<std::size_t> inattentive;  // ascending
};

/// Top-K by score (ties to the lower index); indices are patch-token positions.
Decoupling decouple(const ImportanceScores& scores, double keep_rate);

struct ClusterAssignment {
    /// Centers in descending center score.
    std::vector<std::size_t> center_indices;
    /// Cluster id per row: position of its center in center_indices.
    std::vector<std::size_t> member_of;
    std::vector<double> log_density;
    std::vector<double> delta;
    std::vector<double> log_gamma;

    /// Rows of each cluster, ascending, in center order.
    std::vector<std::vector<std::size_t>> groups() const;
};

/// Non-iterative density-peak clustering into `c` groups.
ClusterAssignment dpc_cluster(const Matrix& subset, std::size_t c);

struct PairMatching {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::size_t> unmatched;  // ascending
    bool clamped = false;
};

/// Greedy disjoint pairs by descending cosine similarity.
PairMatching match_attentive(const Matrix& subset, std::size_t q);

struct MergeResult {
    Matrix rows;
    /// Groups whose scores were all zero in normalized mode (merged by plain mean).
    std::vector<std::size_t> mean_fallback_groups;
};

MergeResult weighted_merge(const Matrix& tokens, const std::vector<std::vector<std::size_t>>& groups,
                           std::span<const double> scores, WeightMode mode);

struct ResolvedCounts {
    std::size_t input = 0;     // patch tokens entering the stage
    std::size_t keep = 0;      // K
    std::size_t pairs = 0;     // q actually fused (after pigeonhole clamp)
    std::size_t clusters = 0;  // c actually formed
    std::size_t output = 0;    // patch tokens leaving the stage
};

/// Counts a stage will produce for `n_in` patch tokens; independent of token values.
ResolvedCounts resolve_counts(const PruneConfig& cfg, std::size_t n_in);

struct PruneStats {
    ResolvedCounts counts;
    bool clamped = false;
    std::size_t mean_fallback_groups = 0;
};

/// One reduction stage. Output: class token, then the attentive side, then cluster tokens.
TokenSequence prune_layer(const TokenSequence& tokens, const ClsAttention& attn, const PruneConfig& cfg,
                          PruneStats* stats = nullptr);

}  // namespace vitprune
