#pragma once

#include <stdexcept>
#include <string>

namespace hrvnet {

// Bad inputs, malformed files, violated preconditions. Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdown at runtime (diverging loss, unstable design). CLI exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace hrvnet
