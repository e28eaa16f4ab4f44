#pragma once

#include <ostream>

namespace evoaug {

inline constexpr const char* kVersion = "0.1.0";

/// Entry point of the evoaug command-line tool. Returns the process exit
/// status: 0 on success, 1 on any error (diagnostic written to `err`).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace evoaug
