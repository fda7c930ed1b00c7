// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/prune.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vitprune/error.hpp"

namespace vitprune {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Groups = std::vector<std::vector<std::size_t>>;

std::vector<std::size_t> merged_provenance(const TokenSequence& seq, const std::vector<std::size_t>& patch_rows) {
    std::vector<std::size_t> out;
    for (auto p : patch_rows) {
        const auto& src = seq.provenance[p + 1];
        out.insert(out.end(), src.begin(), src.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

class SequenceBuilder {
public:
    SequenceBuilder(const TokenSequence& src, std::size_t expected_rows)
        : m_src(src), m_out(expected_rows, src.tokens.cols()) {
        m_prov.reserve(expected_rows);
        m_discarded = src.discarded;
        push_row(src.tokens.row(0), {});
    }

    void keep(std::size_t patch) {
        push_row(m_src.tokens.row(patch + 1), m_src.provenance[patch + 1]);
    }

    void merged(std::span<const double> row, const std::vector<std::size_t>& patch_rows) {
        push_row(row, merged_provenance(m_src, patch_rows));
    }

    void discard(std::size_t patch) {
        const auto& p = m_src.provenance[patch + 1];
        m_discarded.insert(m_discarded.end(), p.begin(), p.end());
    }

    TokenSequence finish() {
        if (m_next != m_out.rows()) {
            throw Error("internal: token count mismatch in prune stage");
        }
        std::sort(m_discarded.begin(), m_discarded.end());
        return TokenSequence{std::move(m_out), std::move(m_prov), std::move(m_discarded)};
    }

private:
    void push_row(std::span<const double> row, std::vector<std::size_t> prov) {
        if (m_next >= m_out.rows()) {
            throw Error("internal: token count overflow in prune stage");
        }
        std::copy(row.begin(), row.end(), m_out.row(m_next).begin());
        m_prov.push_back(std::move(prov));
        ++m_next;
    }

    const TokenSequence& m_src;
    Matrix m_out;
    std::vector<std::vector<std::size_t>> m_prov;
    std::vector<std::size_t> m_discarded;
    std::size_t m_next = 0;
};

// Map subset-local group indices back to patch positions.
Groups remap(const Groups& local, const std::vector<std::size_t>& positions) {
    Groups out;
    out.reserve(local.size());
    for (const auto& g : local) {
        std::vector<std::size_t> m;
        m.reserve(g.size());
        for (auto i : g) {
            m.push_back(positions[i]);
        }
        std::sort(m.begin(), m.end());
        out.push_back(std::move(m));
    }
    return out;
}

void emit_merged(SequenceBuilder& b, const Matrix& patches, const Groups& groups, std::span<const double> scores,
                 WeightMode mode, PruneStats& stats) {
    if (groups.empty()) {
        return;
    }
    auto merged = weighted_merge(patches, groups, scores, mode);
    stats.mean_fallback_groups += merged.mean_fallback_groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        b.merged(merged.rows.row(g), groups[g]);
    }
}

TokenSequence run_decouple_merge(const TokenSequence& seq, const ImportanceScores& scores, const PruneConfig& cfg,
                                 const ResolvedCounts& counts, std::size_t requested_pairs, PruneStats& stats) {
    const Matrix patches = seq.patch_tokens();
    const auto split = decouple(scores, cfg.keep_rate);
    SequenceBuilder out(seq, counts.output + 1);

    // Attentive side: fused pairs and untouched singles, ordered by each
    // group's highest-score member.
    const Matrix attentive = patches.select_rows(split.attentive);
    const auto matching = match_attentive(attentive, requested_pairs);
    stats.clamped = matching.clamped;
    Groups att_groups;
    for (auto [i, j] : matching.pairs) {
        att_groups.push_back({i, j});
    }
    for (auto u : matching.unmatched) {
        att_groups.push_back({u});
    }
    att_groups = remap(att_groups, split.attentive);
    auto representative = [&](const std::vector<std::size_t>& g) {
        std::size_t best = g.front();
        for (auto m : g) {
            if (scores.values[m] > scores.values[best]) {
                best = m;
            }
        }
        return best;
    };
    std::sort(att_groups.begin(), att_groups.end(),
              [&](const auto& a, const auto& b) { return representative(a) < representative(b); });
    for (const auto& g : att_groups) {
        if (g.size() == 1) {
            out.keep(g.front());
        } else {
            emit_merged(out, patches, {g}, scores.values, cfg.weight_mode, stats);
        }
    }

    // Inattentive side: density-peak clusters in descending center score.
    if (!split.inattentive.empty()) {
        if (counts.clusters == 0) {
            for (auto p : split.inattentive) {
                out.discard(p);
            }
        } else {
            const auto clusters = dpc_cluster(patches.select_rows(split.inattentive), counts.clusters);
            emit_merged(out, patches, remap(clusters.groups(), split.inattentive), scores.values,
                        cfg.weight_mode, stats);
        }
    }
    return out.finish();
}

TokenSequence run_importance_only(const TokenSequence& seq, const ImportanceScores& scores, const PruneConfig& cfg,
                                  const ResolvedCounts& counts) {
    const auto split = decouple(scores, cfg.keep_rate);
    SequenceBuilder out(seq, counts.output + 1);
    for (auto p : split.attentive) {
        out.keep(p);
    }
    for (auto p : split.inattentive) {
        out.discard(p);
    }
    return out.finish();
}

TokenSequence run_pack_one(const TokenSequence& seq, const ImportanceScores& scores, const PruneConfig& cfg,
                           const ResolvedCounts& counts, PruneStats& stats) {
    const Matrix patches = seq.patch_tokens();
    const auto split = decouple(scores, cfg.keep_rate);
    SequenceBuilder out(seq, counts.output + 1);
    for (auto p : split.attentive) {
        out.keep(p);
    }
    if (!split.inattentive.empty()) {
        emit_merged(out, patches, {split.inattentive}, scores.values, cfg.weight_mode, stats);
    }
    return out.finish();
}

TokenSequence run_diversity_only(const TokenSequence& seq, const ResolvedCounts& counts, PruneStats& stats) {
    if (counts.keep == counts.input) {
        return seq;
    }
    const Matrix patches = seq.patch_tokens();
    const auto clusters = dpc_cluster(patches, counts.keep);
    const std::vector<double> uniform(patches.rows(), 1.0);
    SequenceBuilder out(seq, counts.output + 1);
    emit_merged(out, patches, clusters.groups(), uniform, WeightMode::normalized, stats);
    return out.finish();
}

TokenSequence run_pool(const TokenSequence& seq, const ResolvedCounts& counts, bool use_max) {
    const Matrix patches = seq.patch_tokens();
    const std::size_t n = counts.input;
    const std::size_t k = counts.keep;
    SequenceBuilder out(seq, k + 1);
    std::vector<double> acc(patches.cols());
    for (std::size_t w = 0; w < k; ++w) {
        const std::size_t lo = w * n / k;
        const std::size_t hi = (w + 1) * n / k;
        std::vector<std::size_t> members(hi - lo);
        std::iota(members.begin(), members.end(), lo);
        auto first = patches.row(lo);
        std::copy(first.begin(), first.end(), acc.begin());
        for (std::size_t r = lo + 1; r < hi; ++r) {
            auto row = patches.row(r);
            for (std::size_t j = 0; j < acc.size(); ++j) {
                acc[j] = use_max ? std::max(acc[j], row[j]) : acc[j] + row[j];
            }
        }
        if (!use_max) {
            for (double& v : acc) {
                v /= static_cast<double>(hi - lo);
            }
        }
        if (members.size() == 1) {
            out.keep(lo);
        } else {
            out.merged(acc, members);
        }
    }
    return out.finish();
}

}  // namespace

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::none: return "none";
        case Strategy::importance_only: return "importance_only";
        case Strategy::pack_one: return "pack_one";
        case Strategy::diversity_only: return "diversity_only";
        case Strategy::decouple_merge: return "decouple_merge";
        case Strategy::avg_pool: return "avg_pool";
        case Strategy::max_pool: return "max_pool";
    }
    return "unknown";
}

Strategy parse_strategy(const std::string& s) {
    for (auto v : {Strategy::none, Strategy::importance_only, Strategy::pack_one, Strategy::diversity_only,
                   Strategy::decouple_merge, Strategy::avg_pool, Strategy::max_pool}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    throw ConfigError("unknown strategy: " + s);
}

std::string to_string(WeightMode m) {
    return m == WeightMode::normalized ? "normalized" : "raw";
}

WeightMode parse_weight_mode(const std::string& s) {
    if (s == "normalized") {
        return WeightMode::normalized;
    }
    if (s == "raw") {
        return WeightMode::raw;
    }
    throw ConfigError("unknown weight mode: " + s);
}

void PruneConfig::validate(std::size_t depth) const {
    if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
        throw ConfigError("keep rate must lie in (0, 1], got " + std::to_string(keep_rate));
    }
    for (std::size_t i = 0; i < prune_layers.size(); ++i) {
        const auto l = prune_layers[i];
        if (l < 1 || l > depth) {
            throw ConfigError("prune layer " + std::to_string(l) + " outside [1, " + std::to_string(depth) + "]");
        }
        if (i > 0 && l <= prune_layers[i - 1]) {
            throw ConfigError("prune layers must be strictly increasing");
        }
    }
}

bool PruneConfig::prunes_at(std::size_t block) const {
    return strategy != Strategy::none &&
           std::find(prune_layers.begin(), prune_layers.end(), block) != prune_layers.end();
}

PruneConfig PruneConfig::identity() {
    PruneConfig c;
    c.keep_rate = 1.0;
    c.pair_count = 0;
    return c;
}

ImportanceScores importance_scores(const ClsAttention& attn) {
    if (attn.head_mean.empty()) {
        throw InvalidInput("class attention has no entries");
    }
    return ImportanceScores{std::vector<double>(attn.head_mean.begin() + 1, attn.head_mean.end())};
}

std::size_t keep_count(double keep_rate, std::size_t n) {
    if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
        throw ConfigError("keep rate must lie in (0, 1], got " + std::to_string(keep_rate));
    }
    // Slack absorbs products like 0.7 * 130 landing one ulp above an integer.
    const double raw = keep_rate * static_cast<double>(n);
    const auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    if (k == 0) {
        throw ConfigError("keep rate " + std::to_string(keep_rate) + " keeps no tokens out of " +
                          std::to_string(n));
    }
    return std::min(k, n);
}

Decoupling decouple(const ImportanceScores& scores, double keep_rate) {
    const std::size_t n = scores.values.size();
    const std::size_t k = keep_count(keep_rate, n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores.values[a] > scores.values[b]; });
    Decoupling d;
    d.attentive.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    d.inattentive.assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    std::sort(d.attentive.begin(), d.attentive.end());
    std::sort(d.inattentive.begin(), d.inattentive.end());
    return d;
}

std::vector<std::vector<std::size_t>> ClusterAssignment::groups() const {
    std::vector<std::vector<std::size_t>> g(center_indices.size());
    for (std::size_t i = 0; i < member_of.size(); ++i) {
        g[member_of[i]].push_back(i);
    }
    return g;
}

ClusterAssignment dpc_cluster(const Matrix& subset, std::size_t c) {
    const std::size_t n = subset.rows();
    if (c == 0 || c > n) {
        throw InvalidInput("cluster count " + std::to_string(c) + " outside [1, " + std::to_string(n) + "]");
    }
    const Matrix sq = pairwise_sqdist(subset);

    ClusterAssignment out;
    out.log_density.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += sq(i, j);
        }
        out.log_density[i] = -s;
    }
    // Strict density order with ties going to the lower index.
    auto denser = [&](std::size_t j, std::size_t i) {
        return out.log_density[j] > out.log_density[i] || (out.log_density[j] == out.log_density[i] && j < i);
    };

    out.delta.assign(n, 0.0);
    out.log_gamma.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double nearest_denser = std::numeric_limits<double>::infinity();
        double farthest = 0.0;
        bool has_denser = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double d = std::sqrt(sq(i, j));
            farthest = std::max(farthest, d);
            if (denser(j, i)) {
                has_denser = true;
                nearest_denser = std::min(nearest_denser, d);
            }
        }
        out.delta[i] = has_denser ? nearest_denser : farthest;
        out.log_gamma[i] = out.log_density[i] + (out.delta[i] > 0.0 ? std::log(out.delta[i]) : kNegInf);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.log_gamma[a] > out.log_gamma[b]; });
    out.center_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(c));

    out.member_of.assign(n, 0);
    std::vector<std::size_t> cluster_of_center(n, n);
    for (std::size_t k = 0; k < c; ++k) {
        cluster_of_center[out.center_indices[k]] = k;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (cluster_of_center[i] != n) {
            out.member_of[i] = cluster_of_center[i];
            continue;
        }
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        std::size_t best_center = n;
        for (std::size_t k = 0; k < c; ++k) {
            const auto ctr = out.center_indices[k];
            const double d = std::sqrt(sq(i, ctr));
            if (d < best_d || (d == best_d && ctr < best_center)) {
                best_d = d;
                best = k;
                best_center = ctr;
            }
        }
        out.member_of[i] = best;
    }
    return out;
}

PairMatching match_attentive(const Matrix& subset, std::size_t q) {
    const std::size_t n = subset.rows();
    PairMatching out;
    if (q > 0) {
        std::vector<double> norms(n);
        for (std::size_t i = 0; i < n; ++i) {
            norms[i] = norm2(subset.row(i));
            if (norms[i] == 0.0) {
                throw InvalidInput("token " + std::to_string(i) + " has zero norm; cosine similarity undefined");
            }
        }
        struct Candidate {
            double sim;
            std::size_t i, j;
        };
        std::vector<Candidate> cands;
        cands.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                cands.push_back({cosine_similarity(subset.row(i), subset.row(j)), i, j});
            }
        }
        // Candidates are generated in lexicographic order, so a stable sort keeps that tie rule.
        std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.sim > b.sim; });
        std::vector<bool> used(n, false);
        for (const auto& cand : cands) {
            if (out.pairs.size() == q) {
                break;
            }
            if (used[cand.i] || used[cand.j]) {
                continue;
            }
            used[cand.i] = used[cand.j] = true;
            out.pairs.emplace_back(cand.i, cand.j);
        }
        out.clamped = out.pairs.size() < q;
    }
    std::vector<bool> paired(n, false);
    for (auto [i, j] : out.pairs) {
        paired[i] = paired[j] = true;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!paired[i]) {
            out.unmatched.push_back(i);
        }
    }
    return out;
}

MergeResult weighted_merge(const Matrix& tokens, const std::vector<std::vector<std::size_t>>& groups,
                           std::span<const double> scores, WeightMode mode) {
    if (scores.size() != tokens.rows()) {
        throw InvalidInput("weighted_merge: " + std::to_string(scores.size()) + " scores for " +
                           std::to_string(tokens.rows()) + " tokens");
    }
    std::vector<bool> seen(tokens.rows(), false);
    for (const auto& g : groups) {
        if (g.empty()) {
            throw InvalidInput("weighted_merge: empty group");
        }
        for (auto i : g) {
            if (i >= tokens.rows() || seen[i]) {
                throw InvalidInput("weighted_merge: groups must be disjoint and in range");
            }
            seen[i] = true;
        }
    }

    MergeResult out{Matrix(groups.size(), tokens.cols()), {}};
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& members = groups[g];
        auto dst = out.rows.row(g);
        if (mode == WeightMode::raw) {
            for (auto m : members) {
                auto src = tokens.row(m);
                for (std::size_t j = 0; j < dst.size(); ++j) {
                    dst[j] += scores[m] * src[j];
                }
            }
            continue;
        }
        double total = 0.0;
        for (auto m : members) {
            total += scores[m];
        }
        const bool fallback = !(total > 0.0);
        if (fallback) {
            out.mean_fallback_groups.push_back(g);
        }
        for (auto m : members) {
            const double w = fallback ? 1.0 / static_cast<double>(members.size()) : scores[m] / total;
            auto src = tokens.row(m);
            for (std::size_t j = 0; j < dst.size(); ++j) {
                dst[j] += w * src[j];
            }
        }
        // Rounding can step an ulp outside the group's coordinate range.
        for (std::size_t j = 0; j < dst.size(); ++j) {
            double lo = tokens(members.front(), j);
            double hi = lo;
            for (auto m : members) {
                lo = std::min(lo, tokens(m, j));
                hi = std::max(hi, tokens(m, j));
            }
            dst[j] = std::clamp(dst[j], lo, hi);
        }
    }
    return out;
}

ResolvedCounts resolve_counts(const PruneConfig& cfg, std::size_t n_in) {
    ResolvedCounts r;
    r.input = n_in;
    if (cfg.strategy == Strategy::none || n_in == 0) {
        r.keep = r.output = n_in;
        return r;
    }
    r.keep = keep_count(cfg.keep_rate, n_in);
    const std::size_t rest = n_in - r.keep;
    switch (cfg.strategy) {
        case Strategy::importance_only:
        case Strategy::diversity_only:
        case Strategy::avg_pool:
        case Strategy::max_pool:
            r.output = r.keep;
            return r;
        case Strategy::pack_one:
            r.clusters = rest > 0 ? 1 : 0;
            r.output = r.keep + r.clusters;
            return r;
        case Strategy::decouple_merge:
        case Strategy::none:
            break;
    }

    std::size_t q = 0;
    if (cfg.pair_count) {
        q = *cfg.pair_count;
        if (q > 0 && q >= r.keep) {
            throw ConfigError("pair count " + std::to_string(q) + " must be below K = " + std::to_string(r.keep));
        }
    } else {
        const auto target = static_cast<std::size_t>(std::llround(0.05 * static_cast<double>(n_in)));
        q = std::min({std::max<std::size_t>(1, target), rest, r.keep / 2});
    }
    r.pairs = std::min(q, r.keep / 2);

    if (rest == 0) {
        r.clusters = 0;
    } else if (cfg.cluster_count) {
        r.clusters = *cfg.cluster_count;
        if (r.clusters > rest) {
            throw ConfigError("cluster count " + std::to_string(r.clusters) + " exceeds the " +
                              std::to_string(rest) + " inattentive tokens");
        }
    } else {
        r.clusters = std::min(q, rest);
    }
    r.output = r.keep - r.pairs + r.clusters;
    return r;
}

TokenSequence prune_layer(const TokenSequence& tokens, const ClsAttention& attn, const PruneConfig& cfg,
                          PruneStats* stats) {
    if (tokens.size() == 0) {
        throw InvalidInput("prune_layer: empty token sequence");
    }
    if (attn.tokens() != tokens.size()) {
        throw InvalidInput("prune_layer: attention covers " + std::to_string(attn.tokens()) + " tokens, sequence has " +
                           std::to_string(tokens.size()));
    }
    PruneStats local;
    PruneStats& st = stats ? *stats : local;
    st = PruneStats{};
    st.counts = resolve_counts(cfg, tokens.patch_count());
    if (cfg.strategy == Strategy::none || tokens.patch_count() == 0) {
        return tokens;
    }
    const auto scores = importance_scores(attn);
    switch (cfg.strategy) {
        case Strategy::importance_only:
            return run_importance_only(tokens, scores, cfg, st.counts);
        case Strategy::pack_one:
            return run_pack_one(tokens, scores, cfg, st.counts, st);
        case Strategy::diversity_only:
            return run_diversity_only(tokens, st.counts, st);
        case Strategy::avg_pool:
            return run_pool(tokens, st.counts, false);
        case Strategy::max_pool:
            return run_pool(tokens, st.counts, true);
        case Strategy::decouple_merge: {
            const std::size_t requested = cfg.pair_count ? *cfg.pair_count : st.counts.pairs;
            auto out = run_decouple_merge(tokens, scores, cfg, st.counts, requested, st);
            return out;
        }
        case Strategy::none:
            break;
    }
    return tokens;
}

}  // namespace vitprune
