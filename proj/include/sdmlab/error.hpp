#pragma once

#include <stdexcept>
#include <string>

namespace sdmlab {

/// Domain error: invalid model, unsatisfiable precondition, exceeded cap.
/// The CLI maps this to exit code 1.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON syntax, missing field, wrong type).
/// The CLI maps this to exit code 2.
class ParseError : public Error {
  public:
    using Error::Error;
};

} // namespace sdmlab
