#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tsp {

using Index = Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Every failure raised by the library derives from Error so callers can
// distinguish toolkit errors from std failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class StructureError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SpecError : public Error {
public:
    using Error::Error;
};

class PlanError : public Error {
public:
    using Error::Error;
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int iteration)
        : Error(what), iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

class DisconnectedError : public Error {
public:
    DisconnectedError(const std::string& what, std::size_t components)
        : Error(what), components_(components) {}
    std::size_t components() const noexcept { return components_; }

private:
    std::size_t components_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, std::size_t column, const std::string& msg)
        : Error(file + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
          line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

} // namespace tsp
