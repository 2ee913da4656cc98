#pragma once

#include <stdexcept>
#include <string>

namespace rolesteer {

// Failure categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
    usage = 1,
    data = 2,
    numerical = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

// Bad arguments, invalid configuration, violated preconditions on sizes or indices.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

// Malformed files, schema violations, tensors that disagree with their manifest.
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

// Non-finite values or degenerate arithmetic (e.g. zero-norm steered residual).
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace rolesteer
