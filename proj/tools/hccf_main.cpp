#include "hccf/cli.hpp"

int main(int argc, char** argv) { return hccf::run_cli(argc, argv); }
