#pragma once

#include <stdexcept>
#include <string>

namespace driveseg {

/// Bad user input: malformed config, invalid parameter combinations.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad data: unreadable files, malformed CSV, dimension mismatches.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: NaN loss, non-PD matrix, diverged solver.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace driveseg
