#pragma once

#include <stdexcept>
#include <string>

namespace bethebox {

// Error hierarchy mirrored by the CLI exit codes:
//   ParseError / ValidationError / UnsupportedModelError -> 2
//   ResourceError -> 3, InternalError -> 4.

struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Requested operation needs a fully associative model.
struct UnsupportedModelError : std::runtime_error {
    explicit UnsupportedModelError(const std::string& what) : std::runtime_error(what) {}
};

// A configured cap (labels, table entries, enumeration guard) was exceeded.
struct ResourceError : std::runtime_error {
    explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// Internal consistency check failed; indicates a bug, not bad input.
struct InternalError : std::runtime_error {
    explicit InternalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bethebox
