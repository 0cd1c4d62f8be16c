#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace revdiff {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitVerifyFailed = 1,
    kExitConfigError = 2,
    kExitNumericalError = 3,
};

/// Entry point of the `revdiff` binary. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct CheckResult {
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct VerifyCheck {
    std::string name;
    std::string description;
    std::function<CheckResult()> run;
};

/// Fast invariant suite behind `revdiff verify`. With `break_sinh` the
/// sinh-form step is sabotaged so the dual-form check must fail.
std::vector<VerifyCheck> verify_checks(std::uint64_t seed, bool break_sinh);

}  // namespace revdiff
