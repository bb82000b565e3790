#include "vdl/cli.hpp"

int main(int argc, char** argv) { return vdl::cli::dispatch(argc, argv); }
