#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gasnorm {

// Two families of failure. ValidationError covers bad input, bad arguments and
// bad configuration (CLI exit code 1). NumericalError covers computations that
// went non-finite or failed to produce a usable result (CLI exit code 2).

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed cell in a text input. Carries the 1-based row/column.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& what, std::size_t row, std::size_t column)
        : ValidationError(what + " (row " + std::to_string(row) + ", column " + std::to_string(column) + ")"),
          row_(row), column_(column) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::size_t column_;
};

class StructuralError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ArgumentError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class MetricError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Non-finite filter state. `step()` is the 0-based observation index.
class FilterError : public NumericalError {
public:
    FilterError(const std::string& what, std::size_t step)
        : NumericalError(what + " at step " + std::to_string(step)), step_(step) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class FitError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class TrainingError : public NumericalError {
public:
    TrainingError(const std::string& what, std::size_t epoch)
        : NumericalError(what + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}

    [[nodiscard]] std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

} // namespace gasnorm
