#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gbh::cli {

/// Entry point of gbhammer-sim; args exclude the program name. Returns the
/// process exit code: 0 for a clean run whatever the verdict, 1 for runtime
/// failures, 2 for usage or configuration errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gbh::cli
