#include "cli.hpp"

int main(int argc, char** argv) { return tsccn::cli::run(argc, argv); }
