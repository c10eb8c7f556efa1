#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace faed {

// Every failure the library raises derives from Error. The category decides
// the CLI exit code (1 config/usage, 2 data, 3 numerical).
enum class ErrorKind { Config, Data, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class SymmetryError : public Error {
public:
    explicit SymmetryError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class InsufficientDataError : public Error {
public:
    explicit InsufficientDataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(ErrorKind::Data, what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NotPsdError : public Error {
public:
    NotPsdError(const std::string& what, double eigenvalue)
        : Error(ErrorKind::Numerical, what), eigenvalue_(eigenvalue) {}
    double eigenvalue() const noexcept { return eigenvalue_; }

private:
    double eigenvalue_;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

class DivergedError : public Error {
public:
    explicit DivergedError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace faed
