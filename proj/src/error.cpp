#include "llie/error.hpp"

namespace llie {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NotFound: return "NotFound";
        case ErrorKind::DecodeError: return "DecodeError";
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::ShapeError: return "ShapeError";
        case ErrorKind::DependencyError: return "DependencyError";
        case ErrorKind::NumericalError: return "NumericalError";
        case ErrorKind::CheckpointError: return "CheckpointError";
        case ErrorKind::PairingError: return "PairingError";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Error";
}

namespace {

std::string join_offenders(const std::vector<std::string>& names) {
    std::string out = "unmatched files:";
    for (const auto& n : names) out += " " + n;
    return out;
}

}  // namespace

PairingError::PairingError(std::vector<std::string> offenders)
    : Error(ErrorKind::PairingError, join_offenders(offenders)), offenders_(std::move(offenders)) {}

}  // namespace llie
