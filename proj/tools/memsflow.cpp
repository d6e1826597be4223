#include "memsflow/cli.hpp"

int main(int argc, char** argv) { return memsflow::run_cli(argc, argv); }
