#pragma once

#include <stdexcept>
#include <string>

namespace hybrid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvariantError : public Error {
public:
    using Error::Error;
};

class TruncationError : public Error {
public:
    using Error::Error;
};

class BoundaryLeakError : public Error {
public:
    using Error::Error;
};

class DomainTooSmall : public Error {
public:
    using Error::Error;
};

class NormalizationError : public Error {
public:
    using Error::Error;
};

class UnsupportedPoint : public Error {
public:
    using Error::Error;
};

class DegreeError : public Error {
public:
    using Error::Error;
};

/// Integration blew its time-step or drift budget.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Input is not representable (e.g. not a Husimi function at this truncation).
class IllPosedError : public Error {
public:
    using Error::Error;
};

class NonGaussianInitial : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace hybrid
