// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Brute-force reference evaluations used to cross-check the production
// kernels. They share no code with the library paths they verify.

#include <cstddef>
#include <vector>

namespace vitprune::oracle {

using Rows = std::vector<std::vector<double>>;

struct DpcReference {
    std::vector<std::size_t> centers;  // in selection order
    std::vector<std::size_t> center_of;  // per row: token index of its center
};

/// Density = -sum of squared distances, delta = distance to the nearest
/// denser token (farthest token for the densest), score = log density + log delta,
/// centers picked one at a time by maximum score, rows joined to the nearest center.
DpcReference dpc(const Rows& rows, std::size_t c);

/// Smallest l1 objective sum_i |x_i - z| over z on a grid of `step` across [min, max].
double l1_grid_min(const std::vector<double>& column, double step);

/// sum_i |x_i - z|
double l1_objective(const std::vector<double>& column, double z);

/// ceil(tenths / 10 * n) using integer arithmetic only.
std::size_t ceil_tenths(std::size_t tenths, std::size_t n);

/// Product via the textbook triple loop.
Rows matmul(const Rows& a, const Rows& b);

}  // namespace vitprune::oracle
