#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace socpinn::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitVerification = 1,
    kExitUsage = 2,
    kExitData = 3,
};

/// Runs the soc_pinn command line. args[0] is the program name. Never
/// throws; library errors are printed to `err` and mapped to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker threads allowed by SOC_PINN_THREADS (at least 1, at most the
/// hardware concurrency when the variable is unset).
std::size_t thread_budget();

}  // namespace socpinn::cli
