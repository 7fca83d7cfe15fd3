#pragma once

#include <stdexcept>
#include <string>

namespace mrsr {

// Bad inputs: malformed files, invariant violations, mismatched shapes.
// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures discovered mid-computation (non-finite loss,
// singular estimates). The CLI maps these to exit code 2.
class ComputeError : public std::runtime_error {
public:
    explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mrsr
