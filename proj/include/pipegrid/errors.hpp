#pragma once

#include <stdexcept>
#include <string>

namespace pipegrid {

/// Malformed or inconsistent input data (files, parameters, cross-references).
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical stage failed to converge or the problem is infeasible.
class SolveError : public std::runtime_error {
public:
    explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pipegrid
