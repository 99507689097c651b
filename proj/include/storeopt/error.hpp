#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace storeopt {

/// Base class for every error raised by the library.
class StoreError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A store specification or model parameter breaks one of its invariants.
class BadSpecError : public StoreError {
public:
    using StoreError::StoreError;
};

/// Buy price below sell price (the cost would not be convex).
class PriceOrderError : public StoreError {
public:
    explicit PriceOrderError(const std::string& what, std::size_t line = 0)
        : StoreError(what), line_(line) {}
    /// 1-based input line, 0 when not read from a file.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// No feasible schedule connects the initial and terminal levels.
class InfeasibleError : public StoreError {
public:
    InfeasibleError(const std::string& what, std::size_t first_blocked_time)
        : StoreError(what), first_blocked_time_(first_blocked_time) {}
    std::size_t first_blocked_time() const noexcept { return first_blocked_time_; }

private:
    std::size_t first_blocked_time_;
};

class BracketFailure : public StoreError {
public:
    using StoreError::StoreError;
};

class NoConvergence : public StoreError {
public:
    using StoreError::StoreError;
};

class BudgetExceeded : public StoreError {
public:
    using StoreError::StoreError;
};

/// The solver produced a schedule that failed its own optimality certificate.
class CertificationError : public StoreError {
public:
    using StoreError::StoreError;
};

class NegativePriceError : public StoreError {
public:
    NegativePriceError(const std::string& what, std::size_t t) : StoreError(what), t_(t) {}
    std::size_t time() const noexcept { return t_; }

private:
    std::size_t t_;
};

/// Malformed input file. Carries the 1-based line number.
class ParseError : public StoreError {
public:
    ParseError(const std::string& what, std::size_t line)
        : StoreError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Time column of a price file is not consecutive.
class GapError : public ParseError {
public:
    using ParseError::ParseError;
};

}  // namespace storeopt
