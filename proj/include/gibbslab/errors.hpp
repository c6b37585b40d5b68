#pragma once

#include <stdexcept>
#include <string>

namespace gibbslab {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (negative beta, bad sizes, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The requested computation exceeds a documented size cap.
class CapExceeded : public Error {
public:
    using Error::Error;
};

/// Every configuration carries an infinite edge, so the Gibbs measure is undefined.
class AllInfiniteInstance : public Error {
public:
    using Error::Error;
};

/// Floating-point failure detected at run time (cancellation, ill-conditioning).
class NumericalError : public Error {
public:
    using Error::Error;
};

}  // namespace gibbslab
