#pragma once

#include <string>
#include <vector>

namespace snnforge {

// Runs one CLI invocation (args exclude the program name).
// Exit codes: 0 success, 1 usage/configuration error, 2 data/format error.
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace snnforge
