// Copyright (c) 2026, the gta-classify authors
// SPDX-License-Identifier: Apache-2.0

#include "gta/cli.hpp"

int main(int argc, char** argv) { return gta::cli::main_entry(argc, argv); }
