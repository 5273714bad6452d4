// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "lift/cli.hpp"

int main(int argc, char** argv) { return lift::run_cli(argc, argv, std::cout, std::cerr); }
