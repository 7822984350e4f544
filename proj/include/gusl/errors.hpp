#pragma once

#include <stdexcept>
#include <string>

namespace gusl {

// Invalid arguments, broken invariants, incompatible shapes.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem and stream failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (bad header field, bad checksum).
class FormatError : public IoError {
public:
    explicit FormatError(const std::string& msg) : IoError(msg) {}
};

// Bundle written by an incompatible format version.
class VersionError : public ValidationError {
public:
    explicit VersionError(const std::string& msg) : ValidationError(msg) {}
};

}  // namespace gusl
