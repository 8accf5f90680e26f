#pragma once

#include <stdexcept>
#include <string>

namespace statnet {

// Root of every error the library throws. Subclasses map onto the failure
// classes the CLI turns into exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidScalingError : public Error {
public:
    using Error::Error;
};

class DegenerateParameterError : public Error {
public:
    using Error::Error;
};

class InvalidTuningError : public Error {
public:
    using Error::Error;
};

class UnsupportedActivationError : public Error {
public:
    using Error::Error;
};

class InvalidSizeError : public Error {
public:
    using Error::Error;
};

class SingularityError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    using Error::Error;
};

class ExperimentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace statnet
