#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pm25 {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rank deficiency, zero temperature range inside exp(-b/trg), and similar.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Too few observations for the requested statistic or fit.
class DegreesOfFreedomError : public Error {
public:
    using Error::Error;
};

/// Missing or unusable header column.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Malformed data row. Carries the 1-based data row number and the field name.
class ParseError : public Error {
public:
    ParseError(std::size_t row, std::string field, const std::string& detail)
        : Error("row " + std::to_string(row) + ", field '" + field + "': " + detail),
          row_(row),
          field_(std::move(field)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t row_;
    std::string field_;
};

/// Input that violates a data-level precondition (ordering, duplicates, slot counts).
class DataError : public Error {
public:
    using Error::Error;
};

/// A requested input is not available, e.g. the previous day's observation.
class UnavailableError : public Error {
public:
    using Error::Error;
};

}  // namespace pm25
