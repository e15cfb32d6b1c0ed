#pragma once

#include <stdexcept>

namespace fer {

/// Bad or inconsistent experiment configuration (detected before any compute).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file (delimited data, snapshots, histories, checkpoints).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dimension mismatch between tensors that must agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Non-finite value where a finite one is required.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation invoked in a mode that does not allow it.
struct ModeError : std::logic_error {
    using std::logic_error::logic_error;
};

} // namespace fer
