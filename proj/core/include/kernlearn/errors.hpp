#ifndef KERNLEARN_ERRORS_HPP
#define KERNLEARN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kernlearn {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments: dimension mismatches, out-of-range indices, invalid configs.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A size or node-count guard refused to allocate (binomial overflow, tensor rules).
class SizeGuardError : public Error {
public:
    using Error::Error;
};

/// A matrix that had to be factorized was numerically singular.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(const std::string &what, double smallest_pivot)
        : Error(what), smallest_pivot_(smallest_pivot) {}

    [[nodiscard]] double smallestPivot() const noexcept { return smallest_pivot_; }

private:
    double smallest_pivot_;
};

/// Degenerate input: zero variance, all-zero coefficients, empty splits.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Result of a computation failed an internal consistency check.
class NumericalError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace kernlearn

#endif // KERNLEARN_ERRORS_HPP
