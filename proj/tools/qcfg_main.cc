#include <iostream>

#include "qcfg/cli.h"

int main(int argc, char** argv) { return qcfg::RunCli(argc, argv, std::cin, std::cout, std::cerr); }
