#include "patchdepth/pipeline.hpp"

int main(int argc, char** argv) { return patchdepth::cli_main(argc, argv); }
