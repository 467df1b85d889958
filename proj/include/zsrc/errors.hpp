#pragma once

#include <stdexcept>
#include <string>

namespace zsrc {

// Bad inputs: malformed files, unknown ids, shape mismatches, config errors.
// The CLI maps these to exit code 1.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures that arise while computing on valid inputs (divergence, saturated
// negative sampling, degenerate splits). The CLI maps these to exit code 2.
class ComputeError : public std::runtime_error {
public:
    explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace zsrc
