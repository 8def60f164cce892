#pragma once

#include <stdexcept>
#include <string>

namespace rainfill {

/// Invalid or inconsistent configuration values.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing, malformed, or mutually inconsistent data files.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values or undefined numerical results.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rainfill
