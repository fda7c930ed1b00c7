// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/flops.hpp"

namespace vitprune {

namespace {

using u64 = std::uint64_t;

u64 merge_estimate(const PruneConfig& cfg, const ResolvedCounts& c, std::size_t dim) {
    const u64 d = dim;
    const u64 n = c.input;
    const u64 k = c.keep;
    const u64 rest = n - k;
    switch (cfg.strategy) {
        case Strategy::decouple_merge:
            return (c.pairs > 0 ? k * k * d : 0) + (c.clusters > 0 ? rest * rest * d : 0);
        case Strategy::pack_one:
            return rest * d;
        case Strategy::diversity_only:
            return k == n ? 0 : n * n * d;
        case Strategy::avg_pool:
        case Strategy::max_pool:
            return n * d;
        case Strategy::importance_only:
        case Strategy::none:
            return 0;
    }
    return 0;
}

FlopsReport accumulate(const VitConfig& cfg, const std::optional<PruneConfig>& prune, const FlopsOptions& opt) {
    const std::size_t d = cfg.embed_dim;
    const std::size_t hidden = cfg.hidden_dim();
    FlopsReport r;
    std::size_t patches = cfg.num_patches();
    for (std::size_t b = 1; b <= cfg.depth; ++b) {
        LayerFlops lf;
        lf.block = b;
        lf.tokens_mhsa = patches + 1;
        if (prune && prune->prunes_at(b)) {
            const auto counts = resolve_counts(*prune, patches);
            if (opt.include_merge) {
                lf.merge_flops = merge_estimate(*prune, counts, d);
            }
            patches = counts.output;
        }
        lf.tokens_ffn = patches + 1;
        lf.mhsa_flops = mhsa_flops(lf.tokens_mhsa, d);
        lf.ffn_flops = ffn_flops(lf.tokens_ffn, d, hidden);
        r.total_flops += lf.total();
        r.per_layer.push_back(lf);
    }
    if (opt.include_embed_head) {
        r.embed_flops = static_cast<u64>(cfg.num_patches()) * cfg.channels * cfg.patch_size * cfg.patch_size * d;
        r.head_flops = static_cast<u64>(d) * cfg.num_classes;
        r.total_flops += r.embed_flops + r.head_flops;
    }
    return r;
}

}  // namespace

std::uint64_t mhsa_flops(std::size_t tokens, std::size_t dim) {
    const u64 n = tokens;
    const u64 d = dim;
    return 4 * n * d * d + 2 * n * n * d;
}

std::uint64_t ffn_flops(std::size_t tokens, std::size_t dim, std::size_t hidden) {
    return 2 * static_cast<u64>(tokens) * dim * hidden;
}

FlopsReport flops(const VitConfig& cfg, const std::optional<PruneConfig>& prune, const FlopsOptions& options) {
    cfg.validate();
    if (prune) {
        prune->validate(cfg.depth);
    }
    FlopsReport r = accumulate(cfg, prune, options);
    r.baseline_flops = accumulate(cfg, std::nullopt, options).total_flops;
    r.reduction_pct = r.baseline_flops == 0
                          ? 0.0
                          : 100.0 * (1.0 - static_cast<double>(r.total_flops) / static_cast<double>(r.baseline_flops));
    return r;
}

}  // namespace vitprune
