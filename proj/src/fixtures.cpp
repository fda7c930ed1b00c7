// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "vitprune/fixtures.hpp"

#include <cmath>
#include <random>

namespace vitprune {

namespace {

class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : m_rng(seed) {}
    // [-a, a], rounded to float. Callers that shift the value must round again.
    double operator()(double a) {
        const double u = static_cast<double>(m_rng() >> 11) * 0x1.0p-53;
        return static_cast<double>(static_cast<float>((2.0 * u - 1.0) * a));
    }

private:
    std::mt19937_64 m_rng;
};

}  // namespace

WeightStore random_weights(const VitConfig& cfg, std::uint64_t seed) {
    Uniform rnd(seed);
    WeightStore store(cfg.tag());
    for (const auto& spec : canonical_tensors(cfg)) {
        Tensor t{spec.shape, {}};
        t.data.resize(t.numel());
        const bool is_norm_scale = spec.name.find("norm") != std::string::npos &&
                                   spec.name.ends_with(".weight");
        const bool is_bias = spec.name.ends_with(".bias");
        const double fan_in = spec.shape.size() >= 2 ? static_cast<double>(t.numel() / spec.shape.front()) : 1.0;
        for (double& v : t.data) {
            if (is_norm_scale) {
                v = static_cast<double>(static_cast<float>(1.0 + rnd(0.1)));
            } else if (is_bias) {
                v = rnd(0.05);
            } else if (spec.name == "cls_token" || spec.name == "pos_embed") {
                v = rnd(0.5);
            } else {
                v = rnd(std::sqrt(3.0 / fan_in));
            }
        }
        store.put(spec.name, std::move(t));
    }
    return store;
}

Tensor random_image(const VitConfig& cfg, std::uint64_t seed) {
    Uniform rnd(seed ^ 0x9e3779b97f4a7c15ull);
    Tensor t{{cfg.channels, cfg.image_size, cfg.image_size}, {}};
    t.data.resize(t.numel());
    for (double& v : t.data) {
        v = rnd(1.0);
    }
    return t;
}

}  // namespace vitprune
