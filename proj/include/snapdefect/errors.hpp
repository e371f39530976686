#pragma once

#include <stdexcept>
#include <string>

namespace snapdefect {

// Error hierarchy. The CLI maps each family onto a process exit code:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad magic, unsupported version, or truncated payload in a snapshot file.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace snapdefect
