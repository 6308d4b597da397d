#include "laprop/cli_app.hpp"

int main(int argc, char** argv) { return laprop::cli::run_cli(argc, argv); }
