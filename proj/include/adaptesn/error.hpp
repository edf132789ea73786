#pragma once

#include <stdexcept>
#include <string>

namespace adaptesn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A simulated or forecast trajectory left its admissible range.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Operand shapes or lengths do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A matrix is numerically zero or a factorization failed.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Not enough samples for the requested operation.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

/// An argument violates the documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Missing or malformed input files.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace adaptesn
