#pragma once

#include <stdexcept>
#include <string>

namespace dd {

/// Malformed input: bad JSON, out-of-range parameters, invalid pulse times.
class validation_error : public std::invalid_argument {
public:
    explicit validation_error(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Quadrature non-convergence, divergent integrals, unreliable series truncation.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Constraint set cannot be satisfied (fewer pulses than order conditions).
class infeasible_error : public std::runtime_error {
public:
    explicit infeasible_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dd
