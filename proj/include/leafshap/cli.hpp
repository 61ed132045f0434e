#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace leafshap::cli {

// Runs one command line (without the program name). Data goes to `out`
// unless --out names a file; human messages and timings go to `err`.
// Returns the process exit code: 0 ok, 2 config, 3 validation,
// 4 degenerate query, 5 missing oracle.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

// "a:b" (half-open), "a:" or "i,j,k"; empty selects every row.
std::vector<size_t> parse_instances(const std::string& selector, size_t rows);

// Plain "key = value" lines, '#' comments. Keys are long flag names.
std::vector<std::string> config_file_args(const std::string& path);

}  // namespace leafshap::cli
