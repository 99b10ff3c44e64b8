#include "mwb/cli.hpp"

int main(int argc, char** argv) { return mwb::run_cli(argc, argv); }
