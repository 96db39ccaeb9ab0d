#pragma once

#include <stdexcept>
#include <string>

namespace coreg {

/// Failure categories. The CLI maps these onto process exit codes.
enum class ErrorKind {
    Config,     // invalid hyperparameters, flags, shapes requested by the user
    Data,       // CSV ingestion and dataset contract violations
    Dimension,  // matrix shape mismatch
    Numerical,  // non-finite values, zero-norm rows, failed gradient checks
    Contract,   // precondition violated by the caller
    State,      // operation not valid in the current model state
    Io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config error";
        case ErrorKind::Data: return "data error";
        case ErrorKind::Dimension: return "dimension error";
        case ErrorKind::Numerical: return "numerical error";
        case ErrorKind::Contract: return "contract violation";
        case ErrorKind::State: return "state error";
        case ErrorKind::Io: return "i/o error";
    }
    return "error";
}

}  // namespace coreg
