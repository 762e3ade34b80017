#pragma once

#include <stdexcept>
#include <string>

namespace qvtv {

/// Bad user configuration (unknown key, malformed value, inconsistent settings).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical breakdown: non-finite target, failed factorization, exploding recursion.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, unwritable or malformed input/output files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Adaptive quadrature did not reach its tolerance.
class QuadratureError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace qvtv
