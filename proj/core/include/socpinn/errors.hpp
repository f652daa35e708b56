#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace socpinn {

enum class ErrorKind {
    InvalidArchitecture,
    InvalidInput,
    Shape,
    Cache,
    Numeric,
    Domain,
    Config,
    Schema,
    Data,
    Parse,
    Version,
    Generation,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers which
/// contract was violated. The CLI maps kinds onto process exit codes.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

/// 2 for usage/configuration problems, 3 for data/IO problems. Exit code 1 is
/// reserved for verification failures and never produced from an Error.
int exit_code_for(ErrorKind kind);

using WarningHandler = std::function<void(std::string_view)>;

/// Non-fatal diagnostics (clipped SoC, skipped rows, short cycles). The
/// default handler prints "warning: ..." to stderr.
void warn(std::string_view message);

/// Installs `handler` and returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);

}  // namespace socpinn
