#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ontorag {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input record. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

/// Referential integrity violated between artifacts (missing ids, unmapped mentions).
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// Transport-level failure talking to a model backend.
class ProviderError : public Error {
public:
    using Error::Error;
};

/// A provider answered, but the structured output did not match its schema.
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ModularityError : public Error {
public:
    using Error::Error;
};

}  // namespace ontorag
