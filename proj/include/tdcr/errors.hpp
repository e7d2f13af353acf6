#pragma once

#include <stdexcept>
#include <string>

namespace tdcr {

// Precondition or contract violation on a model operation.
class DomainError : public std::domain_error {
public:
    explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Non-finite value produced by a callback or an evaluation.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (syntax, missing keys, wrong types).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Array sizes in an input file disagree with the declared joint count.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

// Input parsed fine but describes an invalid robot (negative lengths, bad limits).
class InvariantError : public std::runtime_error {
public:
    explicit InvariantError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace tdcr
