#pragma once

#include <stdexcept>
#include <string>

namespace graphmdn {

// Operand shapes do not line up.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Non-finite values or a failed numeric check.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed files, unknown ids, incompatible datasets.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration: values out of range, unknown keys, invalid modes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rigid-alignment failure on rank-deficient point sets.
struct AlignmentError : NumericError {
    using NumericError::NumericError;
};

} // namespace graphmdn
