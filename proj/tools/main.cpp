#include <iostream>

#include "reco/cli.hpp"

int main(int argc, char** argv) { return reco::run_cli(argc, argv, std::cout, std::cerr); }
