#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace liipa {

enum class ErrorKind {
    InvalidArgument,
    Configuration,
    Transport,
    Template,
    Parse,
    InsufficientData,
    Alignment,
    Insertion,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` tells callers (and the CLI's
/// exit-code mapping) what class of failure occurred.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid-argument";
        case ErrorKind::Configuration: return "configuration error";
        case ErrorKind::Transport: return "transport error";
        case ErrorKind::Template: return "template error";
        case ErrorKind::Parse: return "parse error";
        case ErrorKind::InsufficientData: return "insufficient-data";
        case ErrorKind::Alignment: return "alignment error";
        case ErrorKind::Insertion: return "insertion error";
        case ErrorKind::Io: return "I/O error";
    }
    return "error";
}

}  // namespace liipa
