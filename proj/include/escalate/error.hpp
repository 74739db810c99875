#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace escalate {

/// Error carrying a stable machine-readable code (e.g. "NO_ROOT",
/// "OUT_OF_ORDER") and, where it applies, a path to the offending element
/// of an input document.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::string path = {})
        : std::runtime_error(message), code_(std::move(code)), path_(std::move(path)) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& path() const noexcept { return path_; }

private:
    std::string code_;
    std::string path_;
};

}  // namespace escalate
