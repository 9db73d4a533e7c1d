#pragma once

#include <stdexcept>
#include <string>

namespace ecp {

// Base of all library errors. The CLI maps ConfigError/FormatError/IoError to
// exit code 2 (user input) and everything else to exit code 1.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shape disagreement; the message always carries both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Violated precondition of an operation (empty batch, non-scalar loss, ...).
struct ContractError : Error {
    using Error::Error;
};

// Operation called in an invalid object state (double backward, ...).
struct StateError : Error {
    using Error::Error;
};

// Invalid configuration value or unknown configuration key.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input file (CSV, imagery container, checkpoint, ...).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem problem: missing file, unwritable directory, short read.
struct IoError : Error {
    using Error::Error;
};

// Statistical test with no defined answer (zero-variance differences, ...).
struct DegenerateError : Error {
    using Error::Error;
};

}  // namespace ecp
