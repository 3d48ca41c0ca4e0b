#pragma once

// Command-line front end: sparsify | solve | validate | bench | budget.
// Every run emits one JSON report; --pretty adds human-readable tables to
// stdout. Exit codes: 0 success, 1 usage/data errors, 2 validation failure.

#include <string>
#include <vector>

namespace glms {

int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);  // without argv[0]

}  // namespace glms
