#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace vanetsim {

/// Base of every error raised while loading or running a scenario.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed XML. Carries the offending line when the parser reports one.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::optional<int> line)
        : Error(line ? what + " (line " + std::to_string(*line) + ")" : what), line_(line) {}

    std::optional<int> line() const { return line_; }

private:
    std::optional<int> line_;
};

/// A well-formed document that violates the element/attribute grammar.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Dangling references or inconsistent link indices when assembling a network.
class BuildError : public Error {
public:
    using Error::Error;
};

/// Cross-file inconsistencies found while loading a scenario.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Reading inputs or writing outputs failed at the filesystem level.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace vanetsim
