#pragma once

#include <string>
#include <vector>

namespace gscls {

// Runs one CLI command (args exclude the program name). Returns the process
// exit code: 0 on success; errors print "error: <Code>: <message>" to stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace gscls
