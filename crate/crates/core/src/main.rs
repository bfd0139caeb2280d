// Copyright 2026 Diad Contributors
// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(diad::cli::main_with(std::env::args_os()));
}
