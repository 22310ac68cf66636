#pragma once

#include <stdexcept>
#include <string>

namespace pongrl {

// Invalid configuration values (bad flags, bad config file, bad descriptor).
// The CLI maps this family to exit code 2, everything else to 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// API misuse: stepping a finished episode, trace/params mismatch, k <= 0.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shape disagreement, reported as "expected X, got Y".
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File I/O, checkpoint corruption, version mismatch.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pongrl
