#pragma once

#include <string>
#include <vector>

namespace vitaudit {

/// Entry point of the vitaudit tool. Returns the process exit status:
/// 0 on success (per-sample failures included), 1 on a fatal error, and
/// the parser's code for usage errors.
int run_cli(int argc, const char* const* argv);

/// Same, with argv[0] supplied internally.
int run_cli(const std::vector<std::string>& args);

}  // namespace vitaudit
