// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "vitprune/config.hpp"

namespace vitprune::selftest {

struct CheckResult {
    std::string name;
    bool passed = true;
    std::string detail;
    std::uint64_t seed = 0;
};

/// Small 12-block geometry used for randomized end-to-end checks.
VitConfig small_config();

CheckResult check_linalg_properties(std::uint64_t seed, int trials);
CheckResult check_median_optimality(std::uint64_t seed, int trials, std::size_t rows, std::size_t cols);
CheckResult check_dpc_oracle(std::uint64_t seed, int instances);
/// forward(no prune) vs forward(keep rate 1, zero pairs); worst relative logit gap must stay <= 1e-6.
CheckResult check_identity_schedule(std::uint64_t seed, int trials, const VitConfig& cfg);
/// Each prune stage under auto counts must emit ceil(keep * N_in) patch tokens.
CheckResult check_count_law(std::uint64_t seed, const VitConfig& cfg, const std::vector<std::size_t>& keep_tenths);
CheckResult check_merge_properties(std::uint64_t seed, int trials);
CheckResult check_ablation_consistency(std::uint64_t seed, int trials);
CheckResult check_diversity_metric(std::uint64_t seed, int trials);
CheckResult check_trace_invariants(std::uint64_t seed, int trials, const VitConfig& cfg);

struct Report {
    std::uint64_t seed = 0;
    std::vector<CheckResult> checks;

    bool passed() const;
    void print(std::ostream& os) const;
};

/// The full invariant suite. `force_failure` appends a check that always fails.
Report run_all(std::uint64_t seed, bool force_failure = false);

}  // namespace vitprune::selftest
