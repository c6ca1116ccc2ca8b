#pragma once

#include <stdexcept>
#include <string>

namespace svs {

enum class ErrorKind { Validation, Dimension, Index, Config, Io, Numerical };

// Base of every error raised by the library. The kind decides the CLI exit
// code: 2 validation-like, 3 I/O, 4 numerical failure.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept;

private:
    ErrorKind kind_;
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};
struct DimensionError : Error {
    explicit DimensionError(const std::string& what) : Error(ErrorKind::Dimension, what) {}
};
struct IndexError : Error {
    explicit IndexError(const std::string& what) : Error(ErrorKind::Index, what) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace svs
