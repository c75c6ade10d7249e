#pragma once

#include <stdexcept>
#include <string>

namespace voxshape {

// Error taxonomy shared by the library and the CLI. The CLI maps each class
// onto a distinct exit code so pipelines can branch on failure kind.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed or inconsistent configuration (unknown key, bad value).
struct ConfigError : Error {
    using Error::Error;
};

// A required input artifact is missing or structurally invalid.
struct InputError : Error {
    using Error::Error;
};

// Degenerate numerical input (all-empty grid, empty mesh, sigma <= 0, ...).
struct DegenerateInputError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace voxshape
