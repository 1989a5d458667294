#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clickbait {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// A malformed record in a line-oriented input file. `line()` is 1-based.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid argument or request content.
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Feature schema or model file incompatibility.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Non-finite loss or similar breakdown during optimisation.
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace clickbait
