#pragma once

#include <stdexcept>
#include <string>

namespace shiftlab {

/// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes incompatible with the requested operation.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(what) {}
};

/// A computation produced NaN/Inf, or a degenerate value made a result undefined.
class NumericsError : public Error {
public:
    explicit NumericsError(const std::string& what) : Error(what) {}
};

/// File or stream level failure (missing file, bad magic, truncation).
class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what) {}
};

/// Invalid configuration: plan files, policies, architecture parameters.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace shiftlab
