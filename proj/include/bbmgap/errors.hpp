#pragma once

#include <stdexcept>

namespace bbmgap {

/// A convergence, flatness, positivity or stability monitor tripped.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Missing or mismatched upstream artifacts.
class ArtifactError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bbmgap
