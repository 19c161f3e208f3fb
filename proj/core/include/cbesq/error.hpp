#pragma once

#include <stdexcept>
#include <string>

namespace cbesq {

/// Inputs that do not fit together (mismatched grids, bad sizes, bad keys).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The startup expansion of the controlled ODE is not accurate enough at the
/// handoff node; the caller should refine the grid or move the handoff.
class RefinementError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative method ran out of budget before meeting its target.
class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cbesq
