#include "blurbridge/cli/cli.hpp"

int main(int argc, char** argv) { return blurbridge::cli::run(argc, argv); }
