#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace llie {

enum class ErrorKind {
    NotFound,
    DecodeError,
    InvalidInput,
    IoError,
    ShapeError,
    DependencyError,
    NumericalError,
    CheckpointError,
    PairingError,
    ConfigError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Raised by the training step when a loss term stops being finite.
class NumericalError : public Error {
public:
    NumericalError(std::string term, const std::string& message)
        : Error(ErrorKind::NumericalError, term + ": " + message), term_(std::move(term)) {}

    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

/// Raised when enhanced and reference directories disagree on file names.
class PairingError : public Error {
public:
    explicit PairingError(std::vector<std::string> offenders);

    const std::vector<std::string>& offenders() const noexcept { return offenders_; }

private:
    std::vector<std::string> offenders_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace llie
