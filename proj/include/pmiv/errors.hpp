#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pmiv {

/// Malformed JSON or a structurally wrong document.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t byte_offset)
        : std::runtime_error(what), byte_offset_(byte_offset) {}
    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// A document that parsed but violates an invariant (dangling id, reference cycle, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Vectors or models built under different feature spaces.
class SchemaMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad training/scoring data or configuration values.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pmiv
