#include "socpinn/errors.hpp"

#include <iostream>
#include <mutex>

namespace socpinn {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArchitecture: return "invalid-architecture";
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Cache: return "cache";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Config: return "config";
        case ErrorKind::Schema: return "schema";
        case ErrorKind::Data: return "data";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Version: return "version";
        case ErrorKind::Generation: return "generation";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArchitecture:
        case ErrorKind::InvalidInput:
        case ErrorKind::Domain:
        case ErrorKind::Config:
            return 2;
        default:
            return 3;
    }
}

namespace {

std::mutex g_warn_mutex;

WarningHandler& handler_slot() {
    static WarningHandler handler = [](std::string_view msg) { std::cerr << "warning: " << msg << '\n'; };
    return handler;
}

}  // namespace

void warn(std::string_view message) {
    std::lock_guard lock(g_warn_mutex);
    if (handler_slot()) handler_slot()(message);
}

WarningHandler set_warning_handler(WarningHandler handler) {
    std::lock_guard lock(g_warn_mutex);
    auto previous = std::move(handler_slot());
    handler_slot() = std::move(handler);
    return previous;
}

}  // namespace socpinn
