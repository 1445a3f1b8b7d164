#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or invalid input file content. Carries 1-based row (data rows,
/// header is row 0) and the offending column name when known.
class InputError : public Error
{
public:
    InputError(const std::string& msg, std::size_t row = 0, std::string column = {})
        : Error(format(msg, row, column)), row_(row), column_(std::move(column))
    {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    static std::string format(const std::string& msg, std::size_t row, const std::string& column)
    {
        std::string out;
        if (row > 0) out += "row " + std::to_string(row);
        if (!column.empty()) out += (out.empty() ? "column '" : ", column '") + column + "'";
        return out.empty() ? msg : out + ": " + msg;
    }

    std::size_t row_;
    std::string column_;
};

/// A user has fewer meals than the configured minimum.
class InsufficientDataError : public Error
{
public:
    InsufficientDataError(const std::string& user, std::size_t count, std::size_t required)
        : Error("insufficient data for user '" + user + "': " + std::to_string(count) +
                " meals, " + std::to_string(required) + " required"),
          count_(count), required_(required)
    {}

    std::size_t count() const noexcept { return count_; }
    std::size_t required() const noexcept { return required_; }

private:
    std::size_t count_;
    std::size_t required_;
};

/// Dimension or contract mismatch between arguments.
class ShapeError : public Error
{
public:
    using Error::Error;
};

} // namespace aca
