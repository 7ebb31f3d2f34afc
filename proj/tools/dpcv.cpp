#include "cli.hpp"

int main(int argc, char** argv) { return dpcdvae::cli::run_cli(argc, argv); }
