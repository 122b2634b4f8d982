#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace atomcal::cli {

/// Exit codes: 0 success, 1 operational error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name. Data goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main(int argc, char** argv);

}  // namespace atomcal::cli
