// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "vitprune/diversity.hpp"
#include "vitprune/error.hpp"
#include "vitprune/fixtures.hpp"
#include "vitprune/flops.hpp"
#include "vitprune/model_io.hpp"
#include "vitprune/prune.hpp"
#include "vitprune/selftest.hpp"
#include "vitprune/vit.hpp"

namespace vitprune::cli {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string join(const std::vector<std::string>& parts, const std::string& sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out += (i ? sep : "") + parts[i];
    }
    return out;
}

template <typename T>
std::vector<T> split_list(const std::string& s, T (*parse)(const std::string&)) {
    std::vector<T> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(parse(item));
        }
    }
    return out;
}

std::size_t parse_index(const std::string& s) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
        v = std::stoul(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size()) {
        throw CLI::ValidationError("not a non-negative integer: " + s);
    }
    return v;
}

double parse_real(const std::string& s) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size()) {
        throw CLI::ValidationError("not a number: " + s);
    }
    return v;
}

Strategy parse_strategy_flag(const std::string& s) {
    try {
        return parse_strategy(s);
    } catch (const ConfigError& e) {
        throw CLI::ValidationError(e.what());
    }
}

std::optional<std::size_t> parse_count_or_auto(const std::string& s) {
    if (s.empty() || s == "auto") {
        return std::nullopt;
    }
    return parse_index(s);
}

/// Flags shared by every command that runs a reduction stage.
struct PruneFlags {
    std::string strategy;
    std::optional<double> keep_rate;
    std::string layers = "4,7,10";
    std::string pairs = "auto";
    std::string clusters = "auto";
    std::string weight_mode = "normalized";

    void attach(CLI::App* app) {
        app->add_option("--strategy", strategy,
                        "none|importance_only|pack_one|diversity_only|decouple_merge|avg_pool|max_pool");
        app->add_option("--keep-rate", keep_rate, "Keep rate in (0, 1]");
        app->add_option("--prune-layers", layers, "Comma-separated 1-based block indices")
            ->capture_default_str();
        app->add_option("--pairs", pairs, "Attentive pairs to fuse, or 'auto'")->capture_default_str();
        app->add_option("--clusters", clusters, "Inattentive clusters, or 'auto' (= pairs)")->capture_default_str();
        app->add_option("--weight-mode", weight_mode, "normalized|raw")->capture_default_str();
    }

    /// nullopt when no reduction was requested.
    std::optional<PruneConfig> build() const {
        if (strategy.empty() && !keep_rate) {
            return std::nullopt;
        }
        PruneConfig c;
        c.strategy = strategy.empty() ? Strategy::decouple_merge : parse_strategy_flag(strategy);
        if (c.strategy == Strategy::none) {
            return std::nullopt;
        }
        c.keep_rate = keep_rate.value_or(0.7);
        if (!(c.keep_rate > 0.0 && c.keep_rate <= 1.0)) {
            throw CLI::ValidationError("--keep-rate must lie in (0, 1]");
        }
        c.prune_layers = split_list<std::size_t>(layers, parse_index);
        c.pair_count = parse_count_or_auto(pairs);
        c.cluster_count = parse_count_or_auto(clusters);
        try {
            c.weight_mode = parse_weight_mode(weight_mode);
        } catch (const ConfigError& e) {
            throw CLI::ValidationError(e.what());
        }
        return c;
    }
};

json prune_json(const std::optional<PruneConfig>& p) {
    if (!p) {
        return nullptr;
    }
    json j = {{"strategy", to_string(p->strategy)},
              {"keep_rate", p->keep_rate},
              {"prune_layers", p->prune_layers},
              {"weight_mode", to_string(p->weight_mode)}};
    j["pairs"] = p->pair_count ? json(*p->pair_count) : json("auto");
    j["clusters"] = p->cluster_count ? json(*p->cluster_count) : json("auto");
    return j;
}

std::string prune_label(const std::optional<PruneConfig>& p) {
    if (!p) {
        return "none";
    }
    std::ostringstream os;
    os << to_string(p->strategy) << " keep=" << p->keep_rate << " layers=";
    for (std::size_t i = 0; i < p->prune_layers.size(); ++i) {
        os << (i ? "," : "") << p->prune_layers[i];
    }
    os << " pairs=" << (p->pair_count ? std::to_string(*p->pair_count) : "auto")
       << " clusters=" << (p->cluster_count ? std::to_string(*p->cluster_count) : "auto");
    return os.str();
}

std::string giga(std::uint64_t flops) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3) << static_cast<double>(flops) / 1e9;
    return os.str();
}

// ---------------------------------------------------------------- flops

struct FlopsArgs {
    std::string model = "deit-s";
    std::optional<std::size_t> image_size, patch_size, embed_dim, depth, heads, num_classes;
    std::optional<double> mlp_ratio;
    PruneFlags prune;
    bool include_embed = false;
    bool include_merge = false;
    bool as_json = false;
};

int cmd_flops(const FlopsArgs& a, const std::string& echo, std::ostream& out) {
    VitConfig cfg = VitConfig::from_tag(a.model);
    if (a.image_size) cfg.image_size = *a.image_size;
    if (a.patch_size) cfg.patch_size = *a.patch_size;
    if (a.embed_dim) cfg.embed_dim = *a.embed_dim;
    if (a.depth) cfg.depth = *a.depth;
    if (a.heads) cfg.heads = *a.heads;
    if (a.num_classes) cfg.num_classes = *a.num_classes;
    if (a.mlp_ratio) cfg.mlp_ratio = *a.mlp_ratio;
    cfg.validate();
    const auto prune = a.prune.build();
    const FlopsReport rep = flops(cfg, prune, {a.include_embed, a.include_merge});

    if (a.as_json) {
        json layers = json::array();
        for (const auto& l : rep.per_layer) {
            layers.push_back({{"block", l.block},
                              {"tokens_mhsa", l.tokens_mhsa},
                              {"tokens_ffn", l.tokens_ffn},
                              {"mhsa_flops", l.mhsa_flops},
                              {"ffn_flops", l.ffn_flops},
                              {"merge_flops", l.merge_flops}});
        }
        json j = {{"command", echo},
                  {"model", cfg.tag()},
                  {"prune", prune_json(prune)},
                  {"include_embed_head", a.include_embed},
                  {"include_merge", a.include_merge},
                  {"per_layer", layers},
                  {"embed_flops", rep.embed_flops},
                  {"head_flops", rep.head_flops},
                  {"total_flops", rep.total_flops},
                  {"baseline_flops", rep.baseline_flops},
                  {"reduction_pct", rep.reduction_pct}};
        out << j.dump(2) << "\n";
        return 0;
    }
    out << "# " << echo << "\n";
    out << "model " << cfg.tag() << " (tokens " << cfg.num_tokens() << ", dim " << cfg.embed_dim << ", depth "
        << cfg.depth << ", heads " << cfg.heads << ")\n";
    out << "prune " << prune_label(prune) << "\n";
    out << std::left << std::setw(7) << "block" << std::setw(13) << "tokens_mhsa" << std::setw(12) << "tokens_ffn"
        << std::setw(16) << "mhsa_flops" << std::setw(16) << "ffn_flops" << "merge_flops\n";
    for (const auto& l : rep.per_layer) {
        out << std::left << std::setw(7) << l.block << std::setw(13) << l.tokens_mhsa << std::setw(12)
            << l.tokens_ffn << std::setw(16) << l.mhsa_flops << std::setw(16) << l.ffn_flops << l.merge_flops
            << "\n";
    }
    if (a.include_embed) {
        out << "embed " << rep.embed_flops << "  head " << rep.head_flops << "\n";
    }
    out << "total " << rep.total_flops << " (" << giga(rep.total_flops) << " G)  baseline "
        << giga(rep.baseline_flops) << " G  reduction " << std::fixed << std::setprecision(1) << rep.reduction_pct
        << "%\n";
    out.unsetf(std::ios::floatfield);
    return 0;
}

// ---------------------------------------------------------------- infer

struct InferArgs {
    std::string weights;
    std::string input;
    PruneFlags prune;
    std::size_t top = 5;
    std::string trace_path;
    bool as_json = false;
};

json trace_json(const ForwardTrace& trace) {
    json blocks = json::array();
    for (const auto& bt : trace.blocks) {
        json b = {{"block", bt.block},
                  {"tokens_mhsa", bt.tokens_mhsa},
                  {"tokens_ffn", bt.tokens_ffn},
                  {"cls_attention_head_mean", bt.attention.head_mean}};
        if (bt.prune) {
            const auto& c = bt.prune->counts;
            b["prune"] = {{"input", c.input},     {"keep", c.keep},
                          {"pairs", c.pairs},     {"clusters", c.clusters},
                          {"output", c.output},   {"clamped", bt.prune->clamped},
                          {"mean_fallback_groups", bt.prune->mean_fallback_groups}};
        }
        if (bt.ffn_input) {
            b["provenance"] = bt.ffn_input->provenance;
        }
        blocks.push_back(std::move(b));
    }
    return {{"prune_layers", trace.prune_layers}, {"blocks", blocks}};
}

int cmd_infer(const InferArgs& a, const std::string& echo, std::ostream& out) {
    const auto prune = a.prune.build();
    const auto t0 = Clock::now();
    const WeightStore store = load_weights(a.weights);
    const VitModel model(store);
    const Tensor image = load_tensor(a.input);
    const TraceOptions opts{!a.trace_path.empty(), !a.trace_path.empty()};
    const auto res = forward(image, model, prune, opts);
    const double wall = seconds_since(t0);
    const auto top = top_k(res.logits, a.top);

    if (!a.trace_path.empty()) {
        std::ofstream tf(a.trace_path, std::ios::trunc);
        if (!tf) {
            throw Error("cannot write trace: " + a.trace_path);
        }
        tf << trace_json(res.trace).dump() << "\n";
    }
    if (a.as_json) {
        json rows = json::array();
        for (auto i : top) {
            rows.push_back({{"class", i}, {"logit", res.logits[i]}});
        }
        out << json{{"command", echo},
                    {"model", model.config().tag()},
                    {"prune", prune_json(prune)},
                    {"top", rows},
                    {"wall_seconds", wall}}
                   .dump(2)
            << "\n";
        return 0;
    }
    out << "# " << echo << "\n";
    out << "model " << model.config().tag() << "  prune " << prune_label(prune) << "\n";
    out << "rank  class  logit\n";
    for (std::size_t r = 0; r < top.size(); ++r) {
        out << std::left << std::setw(6) << r + 1 << std::setw(7) << top[r] << std::setprecision(9)
            << res.logits[top[r]] << "\n";
    }
    out << "wall_seconds " << std::setprecision(4) << wall << "\n";
    return 0;
}

// ---------------------------------------------------------------- eval

struct ImageResult {
    std::size_t top1 = 0;
    std::size_t base_top1 = 0;
    double ref_rel_diff = -1.0;  // < 0: no reference logits
    double seconds = 0.0;
};

/// Runs `fn(i)` for i in [0, n) on the configured worker count; results land by index.
template <typename Fn>
void parallel_for(std::size_t n, Fn fn) {
    const unsigned workers = std::max(1u, std::min<unsigned>(thread_count(), static_cast<unsigned>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!first_error) {
                            first_error = std::current_exception();
                        }
                    }
                }
            });
        }
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& ref) {
    if (a.size() != ref.size()) {
        throw InvalidInput("reference logits have " + std::to_string(ref.size()) + " entries, engine produced " +
                           std::to_string(a.size()));
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - ref[i]));
        den = std::max(den, std::abs(ref[i]));
    }
    return num / std::max(den, 1e-12);
}

struct EvalArgs {
    std::string weights;
    std::string manifest;
    PruneFlags prune;
    std::string csv_path;
    bool as_json = false;
};

int cmd_eval(const EvalArgs& a, const std::string& echo, std::ostream& out) {
    const auto prune = a.prune.build();
    const WeightStore store = load_weights(a.weights);
    const VitModel model(store);
    const Manifest manifest = load_manifest(a.manifest, model.config().num_classes);
    const auto& recs = manifest.records;
    std::vector<ImageResult> results(recs.size());

    const auto t0 = Clock::now();
    parallel_for(recs.size(), [&](std::size_t i) {
        const auto ti = Clock::now();
        const Tensor image = load_tensor(manifest.resolve(recs[i].tensor_path));
        const auto base = forward(image, model, std::nullopt, {false, false});
        ImageResult r;
        r.base_top1 = top_k(base.logits, 1).at(0);
        r.top1 = prune ? top_k(forward(image, model, prune, {false, false}).logits, 1).at(0) : r.base_top1;
        if (recs[i].reference_logits_path) {
            r.ref_rel_diff = rel_diff(base.logits, load_tensor(manifest.resolve(*recs[i].reference_logits_path)).data);
        }
        r.seconds = seconds_since(ti);
        results[i] = r;
    });
    const double wall = seconds_since(t0);

    std::size_t correct = 0, agree = 0, with_ref = 0, ref_agree = 0, with_ref_logits = 0;
    double worst_ref = 0.0, time_sum = 0.0;
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = results[i];
        correct += r.top1 == recs[i].label;
        agree += r.top1 == r.base_top1;
        if (recs[i].reference_top1) {
            ++with_ref;
            ref_agree += r.base_top1 == *recs[i].reference_top1;
        }
        if (r.ref_rel_diff >= 0.0) {
            ++with_ref_logits;
            worst_ref = std::max(worst_ref, r.ref_rel_diff);
        }
        time_sum += r.seconds;
    }
    const std::size_t n = recs.size();
    auto ratio = [](std::size_t k, std::size_t d) -> json {
        return d == 0 ? json(nullptr) : json(static_cast<double>(k) / static_cast<double>(d));
    };

    if (!a.csv_path.empty()) {
        std::ofstream csv(a.csv_path, std::ios::trunc);
        if (!csv) {
            throw Error("cannot write CSV: " + a.csv_path);
        }
        csv << "index,tensor_path,label,top1,unpruned_top1,reference_top1,correct,reference_rel_diff,seconds\n";
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = results[i];
            csv << i << "," << recs[i].tensor_path << "," << recs[i].label << "," << r.top1 << "," << r.base_top1
                << "," << (recs[i].reference_top1 ? std::to_string(*recs[i].reference_top1) : "") << ","
                << (r.top1 == recs[i].label ? 1 : 0) << ","
                << (r.ref_rel_diff >= 0.0 ? std::to_string(r.ref_rel_diff) : "") << "," << r.seconds << "\n";
        }
    }

    json summary = {{"command", echo},
                    {"model", model.config().tag()},
                    {"prune", prune_json(prune)},
                    {"images", n},
                    {"top1_accuracy", ratio(correct, n)},
                    {"top1_agreement_vs_unpruned", ratio(agree, n)},
                    {"reference_top1_agreement", ratio(ref_agree, with_ref)},
                    {"reference_logits_max_rel_diff",
                     with_ref_logits ? json(worst_ref) : json(nullptr)},
                    {"mean_seconds_per_image", n ? json(time_sum / static_cast<double>(n)) : json(nullptr)},
                    {"wall_seconds", wall},
                    {"threads", thread_count()}};
    if (a.as_json) {
        out << summary.dump(2) << "\n";
        return 0;
    }
    auto show = [](const json& v) { return v.is_null() ? std::string("undefined") : v.dump(); };
    out << "# " << echo << "\n";
    out << "model " << model.config().tag() << "  prune " << prune_label(prune) << "\n";
    out << "images " << n << "\n";
    out << "top1_accuracy " << show(summary["top1_accuracy"]) << "\n";
    out << "top1_agreement_vs_unpruned " << show(summary["top1_agreement_vs_unpruned"]) << "\n";
    out << "reference_top1_agreement " << show(summary["reference_top1_agreement"]) << "\n";
    out << "reference_logits_max_rel_diff " << show(summary["reference_logits_max_rel_diff"]) << "\n";
    out << "mean_seconds_per_image " << show(summary["mean_seconds_per_image"]) << "\n";
    return 0;
}

// ---------------------------------------------------------------- diversity

struct DiversityArgs {
    std::string weights;
    std::string manifest;
    std::string strategies = "importance_only,decouple_merge";
    std::string keep_rates = "0.5,0.7,0.9";
    PruneFlags prune;
    std::string csv_path;
};

int cmd_diversity(const DiversityArgs& a, const std::string& echo, std::ostream& out) {
    const auto strategies = split_list<Strategy>(a.strategies, parse_strategy_flag);
    const auto rates = split_list<double>(a.keep_rates, parse_real);
    if (strategies.empty() || rates.empty()) {
        throw CLI::ValidationError("strategy and keep-rate grids must be non-empty");
    }
    for (double r : rates) {
        if (!(r > 0.0 && r <= 1.0)) {
            throw CLI::ValidationError("keep rates must lie in (0, 1]");
        }
    }
    PruneFlags base_flags = a.prune;
    base_flags.strategy = "decouple_merge";
    base_flags.keep_rate = 1.0;
    const PruneConfig templ = *base_flags.build();

    const WeightStore store = load_weights(a.weights);
    const VitModel model(store);
    templ.validate(model.config().depth);
    const Manifest manifest = load_manifest(a.manifest, model.config().num_classes);
    const auto& recs = manifest.records;

    struct Cell {
        double diversity = 0.0;
        double per_token = 0.0;
        bool agrees = false;
    };
    const std::size_t grid = strategies.size() * rates.size();
    std::vector<std::vector<Cell>> cells(recs.size(), std::vector<Cell>(grid));
    parallel_for(recs.size(), [&](std::size_t i) {
        const Tensor image = load_tensor(manifest.resolve(recs[i].tensor_path));
        const auto base_top1 = top_k(forward(image, model, std::nullopt, {false, false}).logits, 1).at(0);
        for (std::size_t s = 0; s < strategies.size(); ++s) {
            for (std::size_t k = 0; k < rates.size(); ++k) {
                PruneConfig pc = templ;
                pc.strategy = strategies[s];
                pc.keep_rate = rates[k];
                const auto res = forward(image, model, pc, {false, true});
                const auto rep = measure(res.trace, DiversityScope::final_prune_layer,
                                         pc.prune_layers.empty() ? std::nullopt
                                                                 : std::optional(pc.prune_layers.back()));
                Cell& c = cells[i][s * rates.size() + k];
                c.diversity = rep.per_layer.at(0).score;
                c.per_token = rep.per_layer.at(0).score_per_token;
                c.agrees = top_k(res.logits, 1).at(0) == base_top1;
            }
        }
    });

    std::ofstream file;
    if (!a.csv_path.empty()) {
        file.open(a.csv_path, std::ios::trunc);
        if (!file) {
            throw Error("cannot write CSV: " + a.csv_path);
        }
    }
    std::ostream& csv = a.csv_path.empty() ? out : file;
    if (a.csv_path.empty()) {
        out << "# " << echo << "\n";
    }
    csv << "strategy,keep_rate,images,mean_diversity,mean_diversity_per_token,top1_agreement\n";
    for (std::size_t s = 0; s < strategies.size(); ++s) {
        for (std::size_t k = 0; k < rates.size(); ++k) {
            double div = 0.0, per_tok = 0.0;
            std::size_t agree = 0;
            for (const auto& row : cells) {
                const Cell& c = row[s * rates.size() + k];
                div += c.diversity;
                per_tok += c.per_token;
                agree += c.agrees;
            }
            const double n = static_cast<double>(recs.size());
            csv << to_string(strategies[s]) << "," << rates[k] << "," << recs.size() << ",";
            if (recs.empty()) {
                csv << ",,\n";
            } else {
                csv << std::setprecision(10) << div / n << "," << per_tok / n << ","
                    << static_cast<double>(agree) / n << "\n";
            }
        }
    }
    if (!a.csv_path.empty()) {
        out << "wrote " << grid << " rows to " << a.csv_path << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------- selftest / fixture

int cmd_selftest(std::uint64_t seed, bool force_fail, std::ostream& out) {
    const auto t0 = Clock::now();
    const auto report = selftest::run_all(seed, force_fail);
    report.print(out);
    out << "elapsed_seconds " << std::setprecision(3) << seconds_since(t0) << "\n";
    return report.passed() ? 0 : 1;
}

struct FixtureArgs {
    std::string model = "custom:image=32,patch=4,embed=32,depth=12,heads=4,mlp=4,classes=10";
    std::uint64_t seed = 7;
    std::size_t images = 4;
    std::string out_dir;
};

int cmd_fixture(const FixtureArgs& a, std::ostream& out) {
    const VitConfig cfg = VitConfig::from_tag(a.model);
    namespace fs = std::filesystem;
    const fs::path dir(a.out_dir);
    fs::create_directories(dir);
    const WeightStore store = random_weights(cfg, a.seed);
    write_weights(store, dir / "weights.vpkw");
    const VitModel model(store);
    Manifest manifest;
    for (std::size_t i = 0; i < a.images; ++i) {
        const Tensor image = random_image(cfg, a.seed * 1000003 + i);
        std::ostringstream name;
        name << "image_" << std::setw(4) << std::setfill('0') << i;
        write_tensor(image, dir / (name.str() + ".vpkt"));
        const auto logits = forward(image, model, std::nullopt, {false, false}).logits;
        write_tensor(Tensor{{logits.size()}, logits}, dir / (name.str() + ".logits.vpkt"));
        const std::size_t top1 = top_k(logits, 1).at(0);
        manifest.records.push_back({name.str() + ".vpkt", (top1 + i) % cfg.num_classes, top1,
                                    name.str() + ".logits.vpkt"});
    }
    write_manifest(manifest, dir / "manifest.json");
    out << "wrote " << (dir / "weights.vpkw").string() << ", " << a.images << " tensors, "
        << (dir / "manifest.json").string() << " (model " << cfg.tag() << ")\n";
    return 0;
}

}  // namespace

unsigned thread_count() {
    if (const char* env = std::getenv("VITPRUNE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) {
                return static_cast<unsigned>(v);
            }
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Token-pruned ViT inference, FLOPs planning and diversity measurement"};
    app.require_subcommand(1);
    const std::string echo = join(args);

    FlopsArgs fa;
    auto* flops_cmd = app.add_subcommand("flops", "Analytic per-block FLOPs for a model and prune schedule");
    flops_cmd->add_option("--model", fa.model, "deit-t | deit-s | deit-b | custom:... tag")->capture_default_str();
    flops_cmd->add_option("--image-size", fa.image_size);
    flops_cmd->add_option("--patch-size", fa.patch_size);
    flops_cmd->add_option("--embed-dim", fa.embed_dim);
    flops_cmd->add_option("--depth", fa.depth);
    flops_cmd->add_option("--heads", fa.heads);
    flops_cmd->add_option("--mlp-ratio", fa.mlp_ratio);
    flops_cmd->add_option("--num-classes", fa.num_classes);
    flops_cmd->add_flag("--include-embed", fa.include_embed, "Count patch embedding and classifier head");
    flops_cmd->add_flag("--include-merge", fa.include_merge, "Count an estimate of the reduction stage");
    flops_cmd->add_flag("--json", fa.as_json, "Machine-readable output");
    fa.prune.attach(flops_cmd);

    InferArgs ia;
    auto* infer_cmd = app.add_subcommand("infer", "Classify one tensor file");
    infer_cmd->add_option("--weights", ia.weights)->required();
    infer_cmd->add_option("--input", ia.input)->required();
    infer_cmd->add_option("--top", ia.top)->capture_default_str();
    infer_cmd->add_option("--trace", ia.trace_path, "Write a JSON trace of the forward pass");
    infer_cmd->add_flag("--json", ia.as_json);
    ia.prune.attach(infer_cmd);

    EvalArgs ea;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a manifest of tensors");
    eval_cmd->add_option("--weights", ea.weights)->required();
    eval_cmd->add_option("--manifest", ea.manifest)->required();
    eval_cmd->add_option("--csv", ea.csv_path, "Per-image CSV output path");
    eval_cmd->add_flag("--json", ea.as_json);
    ea.prune.attach(eval_cmd);

    DiversityArgs da;
    auto* div_cmd = app.add_subcommand("diversity", "Final-prune-layer diversity over a strategy x keep-rate grid");
    div_cmd->add_option("--weights", da.weights)->required();
    div_cmd->add_option("--manifest", da.manifest)->required();
    div_cmd->add_option("--strategies", da.strategies)->capture_default_str();
    div_cmd->add_option("--keep-rates", da.keep_rates)->capture_default_str();
    div_cmd->add_option("--prune-layers", da.prune.layers)->capture_default_str();
    div_cmd->add_option("--pairs", da.prune.pairs)->capture_default_str();
    div_cmd->add_option("--clusters", da.prune.clusters)->capture_default_str();
    div_cmd->add_option("--weight-mode", da.prune.weight_mode)->capture_default_str();
    div_cmd->add_option("--csv", da.csv_path, "CSV output path (default: stdout)");

    std::uint64_t seed = 2023;
    bool force_fail = false;
    auto* self_cmd = app.add_subcommand("selftest", "Run the randomized invariant suite");
    self_cmd->add_option("--seed", seed)->capture_default_str();
    self_cmd->add_flag("--force-fail", force_fail, "Append a failing check (exercises the failure path)");

    FixtureArgs xa;
    auto* fix_cmd = app.add_subcommand("fixture", "Write random weights, tensors and a manifest for trying the tool");
    fix_cmd->add_option("--model", xa.model)->capture_default_str();
    fix_cmd->add_option("--seed", xa.seed)->capture_default_str();
    fix_cmd->add_option("--images", xa.images)->capture_default_str();
    fix_cmd->add_option("--out", xa.out_dir)->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
        if (flops_cmd->parsed()) {
            return cmd_flops(fa, echo, out);
        }
        if (infer_cmd->parsed()) {
            return cmd_infer(ia, echo, out);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(ea, echo, out);
        }
        if (div_cmd->parsed()) {
            return cmd_diversity(da, echo, out);
        }
        if (self_cmd->parsed()) {
            return cmd_selftest(seed, force_fail, out);
        }
        if (fix_cmd->parsed()) {
            return cmd_fixture(xa, out);
        }
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace vitprune::cli
