#pragma once

#include <stdexcept>
#include <string>

namespace thermomesh {

/// Invalid input: bad geometry, inconsistent dimensions, malformed config.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A value outside the domain of a material law or numerical routine.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A temperature-dependent system queried at a state other than the one it was assembled at.
class StalenessError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Degenerate response (zero signal, non-positive swing) where a positive one is required.
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure that valid inputs should never trigger.
class InternalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace thermomesh
