// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace voxfuse::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Runs one subcommand. `args` excludes the program name.
/// Returns 0 on success, 1 on usage, configuration or I/O errors and 2 when a
/// library precondition fails.
int dispatch(const std::vector<std::string>& args);

}  // namespace voxfuse::cli
