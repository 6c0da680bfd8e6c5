#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace soclab::cli {

// Exit statuses.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand (gen | tune | verify-bound | dynamics | report |
/// selective). `args` excludes the program name. Data goes to `out` unless a
/// subcommand writes files; diagnostics, usage text and the resolved config
/// go to `err`. --help text goes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace soclab::cli
