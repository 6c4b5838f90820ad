#pragma once

#include <stdexcept>
#include <string>

namespace rrecon {

// Bad or inconsistent configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A required upstream artifact is absent or stale (CLI exit code 3).
class MissingArtifactError : public std::runtime_error {
public:
    explicit MissingArtifactError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: degenerate input, non-finite intermediate (CLI exit code 4).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

enum class FormatErrc {
    bad_magic,
    unsupported_version,
    bad_header,
    dimension_mismatch,
    truncated_payload,
    io_failure,
};

// Malformed on-disk data; carries a distinct code per failure mode.
class FormatError : public std::runtime_error {
public:
    FormatError(FormatErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    FormatErrc code() const { return code_; }

private:
    FormatErrc code_;
};

} // namespace rrecon
