#pragma once

#include <stdexcept>
#include <string>

namespace cpdr {

// Tensor shape / channel mismatches.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// API misuse: backward on a non-scalar, stepping without gradients, ...
struct UsageError : std::logic_error {
    using std::logic_error::logic_error;
};

// Invalid model or run configuration (bad widths, unknown config key, ...).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File and dataset problems.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cpdr
