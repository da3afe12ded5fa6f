#pragma once

#include <stdexcept>
#include <string>

namespace hsd {

// Error families. The CLI maps each family to its own exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Missing or unreadable files, truncated archives.
class IoError : public Error {
public:
    using Error::Error;
};

// Bad schema, bad config, contract violations on inputs.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Non-finite losses or gradients, degenerate numerical problems.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace hsd
