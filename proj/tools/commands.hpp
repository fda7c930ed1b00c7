// Copyright (C) 2026 The vitprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vitprune::cli {

/// Entry point shared by the executable and the tests. `args` excludes argv[0].
/// Returns the process exit code: 0 success, 1 runtime/check failure, 2 usage error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker threads for manifest evaluation, from VITPRUNE_THREADS (default: hardware concurrency).
unsigned thread_count();

}  // namespace vitprune::cli
