// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "vitprune/diversity.hpp"
#include "vitprune/fixtures.hpp"
#include "vitprune/linalg.hpp"
#include "vitprune/oracles.hpp"
#include "vitprune/prune.hpp"
#include "vitprune/vit.hpp"

namespace vitprune::selftest {

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : m_gen(seed) {}
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * (static_cast<double>(m_gen() >> 11) * 0x1.0p-53);
    }
    std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
        return lo + static_cast<std::size_t>(m_gen() % (hi - lo + 1));
    }
    std::uint64_t next() { return m_gen(); }

    Matrix matrix(std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
        Matrix m(r, c);
        for (double& v : m.data()) {
            v = uniform(lo, hi);
        }
        return m;
    }

    std::vector<double> positive(std::size_t n) {
        std::vector<double> v(n);
        for (double& x : v) {
            x = uniform(0.01, 1.0);
        }
        return v;
    }

private:
    std::mt19937_64 m_gen;
};

CheckResult start(const std::string& name, std::uint64_t seed) {
    CheckResult r;
    r.name = name;
    r.seed = seed;
    return r;
}

void fail(CheckResult& r, const std::string& why) {
    if (r.passed) {
        r.passed = false;
        r.detail = why;
    }
}

oracle::Rows to_rows(const Matrix& m) {
    oracle::Rows rows(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        rows[i].assign(m.row(i).begin(), m.row(i).end());
    }
    return rows;
}

double max_rel_gap(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / std::max(den, 1e-12);
}

ClsAttention random_attention(Rng& rng, std::size_t heads, std::size_t n) {
    std::vector<std::vector<double>> rows(heads);
    for (auto& r : rows) {
        Matrix logits = rng.matrix(1, n, -3.0, 3.0);
        row_softmax_inplace(logits);
        r.assign(logits.row(0).begin(), logits.row(0).end());
    }
    return ClsAttention::from_heads(std::move(rows));
}

std::string fmt(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

}  // namespace

VitConfig small_config() {
    VitConfig c;
    c.image_size = 32;
    c.patch_size = 4;
    c.embed_dim = 32;
    c.depth = 12;
    c.heads = 4;
    c.num_classes = 10;
    return c;
}

CheckResult check_linalg_properties(std::uint64_t seed, int trials) {
    auto r = start("linalg_properties", seed);
    Rng rng(seed);
    for (int t = 0; t < trials && r.passed; ++t) {
        const Matrix a = rng.matrix(4, 4);
        const Matrix b = rng.matrix(4, 4);
        const Matrix c = rng.matrix(4, 4);
        const Matrix left = matmul(matmul(a, b), c);
        const Matrix right = matmul(a, matmul(b, c));
        const auto ref = oracle::matmul(oracle::matmul(to_rows(a), to_rows(b)), to_rows(c));
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t j = 0; j < 4; ++j) {
                if (std::abs(left(i, j) - right(i, j)) > 1e-9 || std::abs(left(i, j) - ref[i][j]) > 1e-9) {
                    fail(r, "matmul associativity/oracle mismatch at trial " + std::to_string(t));
                }
            }
        }
        if (matmul(Matrix::identity(4), a) != a || matmul(a, Matrix::identity(4)) != a) {
            fail(r, "identity product changed the operand");
        }

        const Matrix sm = row_softmax(rng.matrix(3, 7, -20.0, 20.0));
        for (std::size_t i = 0; i < sm.rows(); ++i) {
            double s = 0.0;
            for (double v : sm.row(i)) {
                if (!(v > 0.0)) {
                    fail(r, "softmax produced a non-positive entry");
                }
                s += v;
            }
            if (std::abs(s - 1.0) > 1e-9) {
                fail(r, "softmax row sums to " + fmt(s));
            }
        }

        const Matrix pts = rng.matrix(rng.index(1, 9), rng.index(1, 5));
        const Matrix d = pairwise_sqdist(pts);
        for (std::size_t i = 0; i < d.rows(); ++i) {
            if (d(i, i) != 0.0) {
                fail(r, "sqdist diagonal not zero");
            }
            for (std::size_t j = 0; j < d.cols(); ++j) {
                if (d(i, j) != d(j, i)) {
                    fail(r, "sqdist not symmetric");
                }
            }
        }
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " trials";
    }
    return r;
}

CheckResult check_median_optimality(std::uint64_t seed, int trials, std::size_t rows, std::size_t cols) {
    auto r = start("median_l1_optimality", seed);
    Rng rng(seed);
    for (int t = 0; t < trials && r.passed; ++t) {
        const Matrix m = rng.matrix(rows, cols, -2.0, 2.0);
        const auto med = column_median(m);
        for (std::size_t j = 0; j < cols; ++j) {
            std::vector<double> col(rows);
            for (std::size_t i = 0; i < rows; ++i) {
                col[i] = m(i, j);
            }
            const double at_median = oracle::l1_objective(col, med[j]);
            const double grid = oracle::l1_grid_min(col, 1e-2);
            if (at_median > grid + 1e-9) {
                fail(r, "grid beats median at trial " + std::to_string(t) + " column " + std::to_string(j) +
                            ": " + fmt(grid) + " < " + fmt(at_median));
            }
        }
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " random " + std::to_string(rows) + "x" + std::to_string(cols) +
                   " matrices";
    }
    return r;
}

CheckResult check_dpc_oracle(std::uint64_t seed, int instances) {
    auto r = start("dpc_oracle_equivalence", seed);
    Rng rng(seed);
    for (int t = 0; t < instances && r.passed; ++t) {
        const std::size_t n = rng.index(1, 8);
        const std::size_t d = rng.index(1, 4);
        const std::size_t c = rng.index(1, std::min<std::size_t>(3, n));
        Matrix pts = rng.matrix(n, d, -2.0, 2.0);
        // Every fourth instance sits on a coarse lattice to exercise ties and duplicates.
        if (t % 4 == 3) {
            for (double& v : pts.data()) {
                v = std::round(v);
            }
        }
        const auto got = dpc_cluster(pts, c);
        const auto ref = oracle::dpc(to_rows(pts), c);
        if (got.center_indices != ref.centers) {
            fail(r, "centers differ on instance " + std::to_string(t));
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (got.center_indices[got.member_of[i]] != ref.center_of[i]) {
                fail(r, "assignment differs on instance " + std::to_string(t) + " row " + std::to_string(i));
            }
        }
    }
    if (r.passed) {
        r.detail = std::to_string(instances) + " instances, n<=8, d<=4, c<=3";
    }
    return r;
}

CheckResult check_identity_schedule(std::uint64_t seed, int trials, const VitConfig& cfg) {
    auto r = start("identity_schedule", seed);
    Rng rng(seed);
    const Strategy strategies[] = {Strategy::decouple_merge, Strategy::importance_only, Strategy::pack_one,
                                   Strategy::diversity_only, Strategy::avg_pool,        Strategy::max_pool};
    double worst = 0.0;
    for (int t = 0; t < trials && r.passed; ++t) {
        const VitModel model(random_weights(cfg, rng.next()));
        const Tensor image = random_image(cfg, rng.next());
        PruneConfig id = PruneConfig::identity();
        id.strategy = strategies[static_cast<std::size_t>(t) % std::size(strategies)];
        const auto base = forward(image, model, std::nullopt, {false, false});
        const auto pruned = forward(image, model, id, {false, false});
        const double gap = max_rel_gap(pruned.logits, base.logits);
        worst = std::max(worst, gap);
        if (!(gap <= 1e-6)) {
            fail(r, "trial " + std::to_string(t) + " (" + to_string(id.strategy) + ") relative gap " + fmt(gap));
        }
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " trials, worst relative gap " + fmt(worst);
    }
    return r;
}

CheckResult check_count_law(std::uint64_t seed, const VitConfig& cfg, const std::vector<std::size_t>& keep_tenths) {
    auto r = start("count_law", seed);
    Rng rng(seed);
    const VitModel model(random_weights(cfg, rng.next()));
    const Tensor image = random_image(cfg, rng.next());
    std::size_t stages = 0;
    for (auto tenths : keep_tenths) {
        PruneConfig pc;
        pc.keep_rate = static_cast<double>(tenths) / 10.0;
        const auto res = forward(image, model, pc, {false, false});
        for (const auto& bt : res.trace.blocks) {
            if (!bt.prune) {
                continue;
            }
            ++stages;
            const std::size_t n_in = bt.tokens_mhsa - 1;
            const std::size_t n_out = bt.tokens_ffn - 1;
            const std::size_t expect = oracle::ceil_tenths(tenths, n_in);
            if (n_out != expect) {
                fail(r, "keep " + fmt(pc.keep_rate) + " block " + std::to_string(bt.block) + ": " +
                            std::to_string(n_in) + " -> " + std::to_string(n_out) + ", expected " +
                            std::to_string(expect));
            }
        }
    }
    if (r.passed && stages != keep_tenths.size() * PruneConfig{}.prune_layers.size()) {
        fail(r, "only " + std::to_string(stages) + " prune stages ran");
    }
    if (r.passed) {
        r.detail = std::to_string(stages) + " prune stages on " + cfg.tag();
    }
    return r;
}

CheckResult check_merge_properties(std::uint64_t seed, int trials) {
    auto r = start("merge_properties", seed);
    Rng rng(seed);
    for (int t = 0; t < trials && r.passed; ++t) {
        const std::size_t d = rng.index(1, 16);
        // Identical tokens collapse to themselves.
        const std::size_t m = rng.index(1, 9);
        const Matrix one = rng.matrix(1, d, -5.0, 5.0);
        Matrix same(m, d);
        for (std::size_t i = 0; i < m; ++i) {
            std::copy(one.row(0).begin(), one.row(0).end(), same.row(i).begin());
        }
        std::vector<std::size_t> all(m);
        std::iota(all.begin(), all.end(), 0);
        const auto merged = weighted_merge(same, {all}, rng.positive(m), WeightMode::normalized);
        for (std::size_t j = 0; j < d; ++j) {
            if (std::abs(merged.rows(0, j) - one(0, j)) > 1e-9) {
                fail(r, "merge of identical tokens drifted at trial " + std::to_string(t));
            }
        }

        // Convex hull and scale invariance on a random partition.
        const std::size_t n = rng.index(2, 20);
        const Matrix pts = rng.matrix(n, d, -3.0, 3.0);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = n; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.index(0, i - 1)]);
        }
        std::vector<std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < n;) {
            const std::size_t len = std::min(n - i, rng.index(1, 4));
            groups.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                                perm.begin() + static_cast<std::ptrdiff_t>(i + len));
            i += len;
        }
        const auto scores = rng.positive(n);
        const auto out = weighted_merge(pts, groups, scores, WeightMode::normalized);
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (std::size_t j = 0; j < d; ++j) {
                double lo = pts(groups[g][0], j);
                double hi = lo;
                for (auto i : groups[g]) {
                    lo = std::min(lo, pts(i, j));
                    hi = std::max(hi, pts(i, j));
                }
                if (out.rows(g, j) < lo || out.rows(g, j) > hi) {
                    fail(r, "merged row left the convex hull at trial " + std::to_string(t));
                }
            }
            if (groups[g].size() == 1) {
                for (std::size_t j = 0; j < d; ++j) {
                    if (out.rows(g, j) != pts(groups[g][0], j)) {
                        fail(r, "singleton group was altered");
                    }
                }
            }
        }
        auto scaled = scores;
        for (double& s : scaled) {
            s *= 8.0;
        }
        const auto out2 = weighted_merge(pts, groups, scaled, WeightMode::normalized);
        for (std::size_t i = 0; i < out.rows.data().size(); ++i) {
            if (std::abs(out.rows.data()[i] - out2.rows.data()[i]) > 1e-12) {
                fail(r, "normalized merge depends on score scale");
            }
        }
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " trials";
    }
    return r;
}

CheckResult check_ablation_consistency(std::uint64_t seed, int trials) {
    auto r = start("ablation_consistency", seed);
    Rng rng(seed);
    for (int t = 0; t < trials && r.passed; ++t) {
        const std::size_t n = rng.index(2, 60);
        const std::size_t d = rng.index(2, 12);
        const TokenSequence seq = TokenSequence::with_identity_provenance(rng.matrix(n + 1, d));
        const ClsAttention attn = random_attention(rng, rng.index(1, 4), n + 1);
        const double keep = rng.uniform(0.1, 1.0);

        PruneConfig pack;
        pack.strategy = Strategy::pack_one;
        pack.keep_rate = keep;
        PruneConfig dm;
        dm.strategy = Strategy::decouple_merge;
        dm.keep_rate = keep;
        dm.pair_count = 0;
        dm.cluster_count = 1;
        const auto a = prune_layer(seq, attn, pack);
        const auto b = prune_layer(seq, attn, dm);
        if (a.tokens != b.tokens || a.provenance != b.provenance) {
            fail(r, "pack_one differs from decouple_merge(q=0,c=1) at trial " + std::to_string(t));
        }

        PruneConfig imp;
        imp.strategy = Strategy::importance_only;
        imp.keep_rate = keep;
        const auto kept = prune_layer(seq, attn, imp);
        const auto split = decouple(importance_scores(attn), keep);
        if (kept.patch_count() != split.attentive.size()) {
            fail(r, "importance_only kept " + std::to_string(kept.patch_count()) + " tokens, decouple chose " +
                        std::to_string(split.attentive.size()));
            continue;
        }
        for (std::size_t i = 0; i < split.attentive.size(); ++i) {
            const auto src = split.attentive[i];
            if (kept.provenance[i + 1] != seq.provenance[src + 1] ||
                !std::equal(kept.tokens.row(i + 1).begin(), kept.tokens.row(i + 1).end(),
                            seq.tokens.row(src + 1).begin())) {
                fail(r, "importance_only token set differs from the attentive set at trial " + std::to_string(t));
            }
        }
        if (!kept.partitions(n) || !a.partitions(n)) {
            fail(r, "provenance no longer partitions the patch set");
        }
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " trials";
    }
    return r;
}

CheckResult check_diversity_metric(std::uint64_t seed, int trials) {
    auto r = start("diversity_metric", seed);
    Rng rng(seed);
    for (int t = 0; t < trials && r.passed; ++t) {
        const std::size_t rows = rng.index(1, 10);
        const std::size_t cols = rng.index(1, 6);
        const Matrix z = rng.matrix(1, cols, -4.0, 4.0);
        Matrix rank1(rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            std::copy(z.row(0).begin(), z.row(0).end(), rank1.row(i).begin());
        }
        if (diversity_score(rank1) != 0.0) {
            fail(r, "r(1 z^T) != 0 at trial " + std::to_string(t));
        }

        const Matrix m = rng.matrix(6, 4);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = 6; i > 1; --i) {
            std::swap(perm[i - 1], perm[rng.index(0, i - 1)]);
        }
        const double base = diversity_score(m);
        if (diversity_score(m.select_rows(perm)) != base) {
            fail(r, "row permutation changed the score at trial " + std::to_string(t));
        }
        if (!(base > 0.0)) {
            fail(r, "distinct rows scored zero");
        }
        Matrix scaled = m;
        for (double& v : scaled.data()) {
            v *= 2.5;
        }
        if (std::abs(diversity_score(scaled) - 2.5 * base) > 1e-9 * std::max(1.0, base)) {
            fail(r, "score is not positively homogeneous");
        }
    }
    auto opt = check_median_optimality(seed + 1, trials, 6, 4);
    if (!opt.passed) {
        fail(r, opt.detail);
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " trials (rank-1 zero, permutation, scaling, 6x4 grid optimality)";
    }
    return r;
}

CheckResult check_trace_invariants(std::uint64_t seed, int trials, const VitConfig& cfg) {
    auto r = start("trace_invariants", seed);
    Rng rng(seed);
    const Strategy strategies[] = {Strategy::decouple_merge, Strategy::importance_only, Strategy::pack_one,
                                   Strategy::diversity_only, Strategy::avg_pool,        Strategy::max_pool};
    for (int t = 0; t < trials && r.passed; ++t) {
        const VitModel model(random_weights(cfg, rng.next()));
        const Tensor image = random_image(cfg, rng.next());
        PruneConfig pc;
        pc.strategy = strategies[static_cast<std::size_t>(t) % std::size(strategies)];
        pc.keep_rate = rng.uniform(0.2, 1.0);
        const auto res = forward(image, model, pc, {true, true});
        std::size_t prev = res.trace.blocks.front().tokens_mhsa;
        for (const auto& bt : res.trace.blocks) {
            if (bt.tokens_mhsa > prev || bt.tokens_ffn > bt.tokens_mhsa) {
                fail(r, "token count increased at block " + std::to_string(bt.block));
            }
            prev = bt.tokens_ffn;
            for (const auto& head : bt.attention.per_head) {
                const double s = std::accumulate(head.begin(), head.end(), 0.0);
                if (std::abs(s - 1.0) > 1e-6) {
                    fail(r, "attention row sums to " + fmt(s) + " at block " + std::to_string(bt.block));
                }
            }
            if (!bt.ffn_input->partitions(cfg.num_patches())) {
                fail(r, "provenance broken after block " + std::to_string(bt.block) + " (" +
                            to_string(pc.strategy) + ")");
            }
        }
        for (double v : res.logits) {
            if (!std::isfinite(v)) {
                fail(r, "non-finite logit");
            }
        }
        if (res.logits.size() != cfg.num_classes) {
            fail(r, "logit count mismatch");
        }
    }
    if (r.passed) {
        r.detail = std::to_string(trials) + " pruned forwards";
    }
    return r;
}

bool Report::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void Report::print(std::ostream& os) const {
    os << "selftest seed=" << seed << "\n";
    for (const auto& c : checks) {
        os << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail;
        if (!c.passed) {
            os << " [reproduce with --seed " << seed << ", check seed " << c.seed << "]";
        }
        os << "\n";
    }
    std::size_t failed = 0;
    for (const auto& c : checks) {
        failed += c.passed ? 0 : 1;
    }
    os << (failed == 0 ? "all " + std::to_string(checks.size()) + " checks passed"
                       : std::to_string(failed) + " of " + std::to_string(checks.size()) + " checks failed")
       << "\n";
}

Report run_all(std::uint64_t seed, bool force_failure) {
    Report rep;
    rep.seed = seed;
    const VitConfig small = small_config();
    VitConfig count_cfg = small;
    count_cfg.image_size = 56;  // 196 patches, the DeiT token grid
    rep.checks.push_back(check_linalg_properties(seed + 1, 50));
    rep.checks.push_back(check_median_optimality(seed + 2, 50, 5, 3));
    rep.checks.push_back(check_dpc_oracle(seed + 3, 200));
    rep.checks.push_back(check_identity_schedule(seed + 4, 12, small));
    rep.checks.push_back(check_count_law(seed + 5, count_cfg, {3, 5, 7, 9}));
    rep.checks.push_back(check_merge_properties(seed + 6, 100));
    rep.checks.push_back(check_ablation_consistency(seed + 7, 100));
    rep.checks.push_back(check_diversity_metric(seed + 8, 50));
    rep.checks.push_back(check_trace_invariants(seed + 9, 12, small));
    if (force_failure) {
        CheckResult forced = start("forced_failure", seed);
        fail(forced, "failure requested by --force-fail");
        rep.checks.push_back(forced);
    }
    return rep;
}

}  // namespace vitprune::selftest
