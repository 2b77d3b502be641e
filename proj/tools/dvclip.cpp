// SPDX-License-Identifier: Apache-2.0
#include "dvclip/cli.hpp"

int main(int argc, char** argv) { return dvclip::run_cli(argc, argv); }
