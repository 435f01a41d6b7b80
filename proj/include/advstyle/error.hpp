#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace advstyle {

// Shapes disagree with what an operation requires.
class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A value lies outside its admissible range (category id, mask value, epoch).
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where finite values are required.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unknown key or malformed value in a configuration file or flag.
class ConfigError : public DomainError {
public:
    using DomainError::DomainError;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file; carries the byte offset where parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// Weight-file specific failures. Each gets its own type so callers can
// tell a foreign file from a damaged one.
class MagicError : public ParseError {
public:
    using ParseError::ParseError;
};

class VersionError : public ParseError {
public:
    using ParseError::ParseError;
};

class ChecksumError : public ParseError {
public:
    using ParseError::ParseError;
};

class ShapeMismatchError : public DimensionError {
public:
    using DimensionError::DimensionError;
};

}  // namespace advstyle
