// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include "vitprune/config.hpp"
#include "vitprune/model_io.hpp"

namespace vitprune {

/// Complete, valid checkpoint with seeded random values (exactly representable
/// in 32-bit floats, so it round-trips through the weight file bit-exactly).
WeightStore random_weights(const VitConfig& cfg, std::uint64_t seed);

/// [C, H, W] tensor with entries uniform in [-1, 1].
Tensor random_image(const VitConfig& cfg, std::uint64_t seed);

}  // namespace vitprune
