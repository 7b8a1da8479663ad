#pragma once

#include <stdexcept>
#include <string>

namespace cnet {

/// Base class for all cnet errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor rank or dimension mismatch.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value or unknown configuration key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed dataset, manifest, or image content.
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure or unreadable binary artifact.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace cnet
