#include "ofr/cli.hpp"

int main(int argc, char** argv) { return ofr::cli::run(std::vector<std::string>(argv + 1, argv + argc)); }
