#pragma once

#include <stdexcept>
#include <string>

namespace tazza {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A data structure violated one of its own invariants (e.g. a non-bijective
// permutation or an asymmetric distance matrix).
struct InvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoLeakableRowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UnsupportedConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace tazza
