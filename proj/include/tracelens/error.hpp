#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tracelens {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input violates a documented invariant (negative count, duplicate id, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

// Malformed text input. `line` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Operation is undefined for the given data (zero variance, all-equal values, ...).
class DegenerateError : public Error {
public:
    using Error::Error;
};

// Caller broke an operation precondition (too few samples, bad parameter range).
class PreconditionError : public Error {
public:
    using Error::Error;
};

} // namespace tracelens
