// Copyright 2026 The voxfuse Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char** argv) { return voxfuse::cli::dispatch({argv + 1, argv + argc}); }
