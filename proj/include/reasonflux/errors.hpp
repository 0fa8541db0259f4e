#pragma once

#include <stdexcept>
#include <string>

namespace rf {

enum class ErrorCode {
    Io,          // missing/unreadable/unwritable paths
    Parse,       // malformed records, replies, or config
    Validation,  // domain invariant violated
    Backend,     // generation backend failure
    Unsupported, // capability not available on this backend
    Usage,       // bad arguments at the CLI surface
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace rf
