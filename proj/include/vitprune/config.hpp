// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace vitprune {

/// ViT geometry. Presets follow the DeiT family (all depth 12).
struct VitConfig {
    std::size_t image_size = 224;
    std::size_t patch_size = 16;
    std::size_t embed_dim = 384;
    std::size_t depth = 12;
    std::size_t heads = 6;
    double mlp_ratio = 4.0;
    std::size_t num_classes = 1000;
    std::size_t channels = 3;
    double ln_eps = 1e-6;

    std::size_t head_dim() const { return embed_dim / heads; }
    std::size_t grid() const { return image_size / patch_size; }
    std::size_t num_patches() const { return grid() * grid(); }
    std::size_t num_tokens() const { return num_patches() + 1; }
    std::size_t hidden_dim() const;

    /// Throws InvalidInput when the geometry is inconsistent.
    void validate() const;

    static VitConfig deit_tiny();
    static VitConfig deit_small();
    static VitConfig deit_base();

    /// "deit-t" / "deit-s" / "deit-b", or a custom tag of the form
    /// "custom:image=32,patch=8,embed=16,depth=4,heads=2,mlp=4,classes=10".
    static VitConfig from_tag(const std::string& tag);
    std::string tag() const;

    friend bool operator==(const VitConfig&, const VitConfig&) = default;
};

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
};

/// The closed set of tensors a checkpoint for `cfg` must contain, in a fixed order.
std::vector<TensorSpec> canonical_tensors(const VitConfig& cfg);

std::string block_tensor_name(std::size_t block, const std::string& suffix);

}  // namespace vitprune
