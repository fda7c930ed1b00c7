// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/config.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "vitprune/error.hpp"

namespace vitprune {

namespace {

constexpr const char* kCustomPrefix = "custom:";

VitConfig deit(std::size_t dim, std::size_t heads) {
    VitConfig c;
    c.embed_dim = dim;
    c.heads = heads;
    return c;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(value, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != value.size()) {
        throw InvalidInput("bad value for '" + key + "' in model tag: " + value);
    }
    return static_cast<std::size_t>(v);
}

std::string format_ratio(double r) {
    std::ostringstream os;
    os << r;
    return os.str();
}

}  // namespace

std::size_t VitConfig::hidden_dim() const {
    return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

void VitConfig::validate() const {
    if (embed_dim == 0 || heads == 0 || embed_dim % heads != 0) {
        throw InvalidInput("embed_dim " + std::to_string(embed_dim) + " is not divisible by heads " +
                           std::to_string(heads));
    }
    if (patch_size == 0 || image_size == 0 || image_size % patch_size != 0) {
        throw InvalidInput("image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
                           std::to_string(patch_size));
    }
    if (depth == 0 || num_classes == 0 || channels == 0) {
        throw InvalidInput("depth, num_classes and channels must be positive");
    }
    if (!(mlp_ratio > 0.0) || hidden_dim() == 0) {
        throw InvalidInput("mlp_ratio must be positive");
    }
}

VitConfig VitConfig::deit_tiny() { return deit(192, 3); }
VitConfig VitConfig::deit_small() { return deit(384, 6); }
VitConfig VitConfig::deit_base() { return deit(768, 12); }

VitConfig VitConfig::from_tag(const std::string& tag) {
    if (tag == "deit-t") {
        return deit_tiny();
    }
    if (tag == "deit-s") {
        return deit_small();
    }
    if (tag == "deit-b") {
        return deit_base();
    }
    if (tag.rfind(kCustomPrefix, 0) != 0) {
        throw InvalidInput("unknown model tag: " + tag);
    }
    std::map<std::string, std::string> kv;
    std::stringstream ss(tag.substr(std::string(kCustomPrefix).size()));
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw InvalidInput("malformed model tag entry: " + item);
        }
        kv[item.substr(0, eq)] = item.substr(eq + 1);
    }
    VitConfig c;
    for (const auto& [k, v] : kv) {
        if (k == "image") {
            c.image_size = parse_count(k, v);
        } else if (k == "patch") {
            c.patch_size = parse_count(k, v);
        } else if (k == "embed") {
            c.embed_dim = parse_count(k, v);
        } else if (k == "depth") {
            c.depth = parse_count(k, v);
        } else if (k == "heads") {
            c.heads = parse_count(k, v);
        } else if (k == "classes") {
            c.num_classes = parse_count(k, v);
        } else if (k == "channels") {
            c.channels = parse_count(k, v);
        } else if (k == "mlp") {
            try {
                c.mlp_ratio = std::stod(v);
            } catch (const std::exception&) {
                throw InvalidInput("bad value for 'mlp' in model tag: " + v);
            }
        } else {
            throw InvalidInput("unknown key in model tag: " + k);
        }
    }
    c.validate();
    return c;
}

std::string VitConfig::tag() const {
    for (const auto& [name, preset] : {std::pair{"deit-t", deit_tiny()}, std::pair{"deit-s", deit_small()},
                                       std::pair{"deit-b", deit_base()}}) {
        if (*this == preset) {
            return name;
        }
    }
    std::ostringstream os;
    os << kCustomPrefix << "image=" << image_size << ",patch=" << patch_size << ",embed=" << embed_dim
       << ",depth=" << depth << ",heads=" << heads << ",mlp=" << format_ratio(mlp_ratio)
       << ",classes=" << num_classes;
    if (channels != 3) {
        os << ",channels=" << channels;
    }
    return os.str();
}

std::string block_tensor_name(std::size_t block, const std::string& suffix) {
    return "blocks." + std::to_string(block) + "." + suffix;
}

std::vector<TensorSpec> canonical_tensors(const VitConfig& cfg) {
    cfg.validate();
    const std::size_t d = cfg.embed_dim;
    const std::size_t h = cfg.hidden_dim();
    std::vector<TensorSpec> specs = {
        {"cls_token", {1, 1, d}},
        {"pos_embed", {1, cfg.num_tokens(), d}},
        {"patch_embed.proj.weight", {d, cfg.channels, cfg.patch_size, cfg.patch_size}},
        {"patch_embed.proj.bias", {d}},
    };
    for (std::size_t b = 0; b < cfg.depth; ++b) {
        specs.push_back({block_tensor_name(b, "norm1.weight"), {d}});
        specs.push_back({block_tensor_name(b, "norm1.bias"), {d}});
        specs.push_back({block_tensor_name(b, "attn.qkv.weight"), {3 * d, d}});
        specs.push_back({block_tensor_name(b, "attn.qkv.bias"), {3 * d}});
        specs.push_back({block_tensor_name(b, "attn.proj.weight"), {d, d}});
        specs.push_back({block_tensor_name(b, "attn.proj.bias"), {d}});
        specs.push_back({block_tensor_name(b, "norm2.weight"), {d}});
        specs.push_back({block_tensor_name(b, "norm2.bias"), {d}});
        specs.push_back({block_tensor_name(b, "mlp.fc1.weight"), {h, d}});
        specs.push_back({block_tensor_name(b, "mlp.fc1.bias"), {h}});
        specs.push_back({block_tensor_name(b, "mlp.fc2.weight"), {d, h}});
        specs.push_back({block_tensor_name(b, "mlp.fc2.bias"), {d}});
    }
    specs.push_back({"norm.weight", {d}});
    specs.push_back({"norm.bias", {d}});
    specs.push_back({"head.weight", {cfg.num_classes, d}});
    specs.push_back({"head.bias", {cfg.num_classes}});
    return specs;
}

}  // namespace vitprune
