#pragma once

#include <stdexcept>
#include <string>

namespace sparse_eb {

// Invalid parameter values (sigma <= 0, nonpositive bound, ...).
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Argument outside the mathematical domain of an operation (k > n, size mismatch).
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Malformed external input (CSV/JSON).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite intermediate results.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sparse_eb
