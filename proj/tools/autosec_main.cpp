#include "autosec/cli.hpp"

int main(int argc, char** argv) { return autosec::cli::run_cli(argc, argv); }
