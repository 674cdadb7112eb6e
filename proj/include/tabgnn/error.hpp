#pragma once

#include <stdexcept>
#include <string>

namespace tabgnn {

// Bad input: schema/config/data that does not satisfy a contract. The CLI maps
// these to exit status 3.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Failure while running a well-formed request (I/O, divergence).
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tabgnn
