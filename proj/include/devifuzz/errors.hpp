#pragma once

#include <stdexcept>
#include <string>

namespace devifuzz {

/// Violated precondition or invariant of a public operation.
class ContractViolation : public std::logic_error {
public:
    explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

/// Malformed model or dataset file (bad magic, truncated payload, shape chain...).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Dataset/model content is well-formed but unusable for the requested task.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Requested feature outside the supported subset (e.g. training conv layers).
class UnsupportedError : public std::runtime_error {
public:
    explicit UnsupportedError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace devifuzz
