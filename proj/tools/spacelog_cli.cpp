#include "spacelog/cli.hpp"

int main(int argc, char** argv) { return spacelog::run_cli(argc, argv); }
