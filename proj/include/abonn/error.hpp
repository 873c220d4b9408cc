#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace abonn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed model or specification text. Carries the 1-based line number
/// when one is known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// File could not be read or written.
class IoError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// The simplex solver could not produce a trustworthy answer.
class SolverFailure : public Error {
public:
    using Error::Error;
};

/// An internal invariant was breached (a bug, never a user error).
class InvariantError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require_dim(bool ok, const char* what) {
    if (!ok) throw DimensionError(what);
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw PreconditionError(what);
}

inline void ensure(bool ok, const std::string& what) {
    if (!ok) throw InvariantError(what);
}

}  // namespace detail
}  // namespace abonn
