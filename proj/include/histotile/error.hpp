#pragma once

#include <stdexcept>
#include <string>

namespace histotile {

/// Raised for contract violations and malformed inputs anywhere in the pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that does not match a documented layout or format (CLI maps this to exit code 2).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace histotile
