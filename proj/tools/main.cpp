#include "glms/cli.hpp"

int main(int argc, char** argv) { return glms::run_cli(argc, argv); }
