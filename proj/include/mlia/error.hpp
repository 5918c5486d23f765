#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlia {

/// Base of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data or configuration failed validation. The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
    using Error::Error;
};

class EmptyFile : public ValidationError {
public:
    EmptyFile() : ValidationError("input is empty") {}
};

class MissingColumn : public ValidationError {
public:
    explicit MissingColumn(const std::string& column)
        : ValidationError("missing column '" + column + "'"), column_(column) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

/// A cell that is missing, non-numeric or outside its admissible range.
/// `row` is the 1-based data row (header excluded).
class OutOfRangeValue : public ValidationError {
public:
    OutOfRangeValue(std::size_t row, const std::string& column, const std::string& detail)
        : ValidationError("row " + std::to_string(row) + ", column '" + column + "': " + detail),
          row_(row), column_(column) {}
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class DuplicateId : public ValidationError {
public:
    DuplicateId(std::size_t row, const std::string& id)
        : ValidationError("row " + std::to_string(row) + ": duplicate id '" + id + "'"), row_(row), id_(id) {}
    std::size_t row() const noexcept { return row_; }
    const std::string& id() const noexcept { return id_; }

private:
    std::size_t row_;
    std::string id_;
};

class InvalidSpec : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DegenerateGrouping : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class EmptyGroup : public Error {
public:
    using Error::Error;
};

class AllTied : public Error {
public:
    using Error::Error;
};

class ConstantVector : public Error {
public:
    using Error::Error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

}  // namespace mlia
