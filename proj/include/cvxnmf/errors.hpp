#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cvxnmf {

/// Bad shapes, bad parameters, violated preconditions.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain of a log or divergence.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Overflow guard tripped (entrywise exp, Taylor powers).
class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

/// An iteration failed to converge or produced non-finite values.
/// Carries the last iterate (row-major, may be empty) when one exists.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what, std::vector<double> last = {},
                          std::size_t dim = 0)
        : std::runtime_error(what), last_iterate_(std::move(last)), dim_(dim) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    std::size_t dim() const noexcept { return dim_; }

private:
    std::vector<double> last_iterate_;
    std::size_t dim_;
};

/// The rank-two shortcut produced an approximation with negative entries.
class ModeFailure : public std::runtime_error {
public:
    ModeFailure(const std::string& what, std::size_t factor)
        : std::runtime_error(what), factor_(factor) {}
    std::size_t factor() const noexcept { return factor_; }

private:
    std::size_t factor_;
};

/// A rank-two matrix whose Gram cone does not fit in the nonnegative quadrant.
class Infeasible : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file; the message carries the line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// File system failure; the message names the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace cvxnmf
