#pragma once

#include <stdexcept>
#include <string>

namespace phn {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Validation-style failures: bad arguments, bad files, bad configs.
// The CLI maps these to exit code 1.
struct InvalidInput : Error {
    using Error::Error;
};
struct InvalidBatch : InvalidInput {
    using InvalidInput::InvalidInput;
};
struct InvalidDataset : InvalidInput {
    using InvalidInput::InvalidInput;
};
struct ConfigError : InvalidInput {
    using InvalidInput::InvalidInput;
};
struct FormatError : InvalidInput {
    using InvalidInput::InvalidInput;
};
struct UnsupportedVersion : FormatError {
    using FormatError::FormatError;
};
struct UnsupportedDimension : InvalidInput {
    using InvalidInput::InvalidInput;
};

// Runtime-style failures: the CLI maps these to exit code 2.
struct RuntimeFailure : Error {
    using Error::Error;
};
struct IoError : RuntimeFailure {
    using RuntimeFailure::RuntimeFailure;
};
struct NumericalInstability : RuntimeFailure {
    using RuntimeFailure::RuntimeFailure;
};
// Thrown by dist_grad at exactly coincident points; callers inside loss
// sums apply the zero-subgradient rule instead of letting this escape.
struct ZeroDistanceGradient : RuntimeFailure {
    using RuntimeFailure::RuntimeFailure;
};
struct DivergedError : RuntimeFailure {
    using RuntimeFailure::RuntimeFailure;
};

} // namespace phn
