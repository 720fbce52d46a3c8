#pragma once

#include <stdexcept>

namespace rfo {

// Solver non-convergence, overflow, and similar numeric failures. Input and
// precondition violations use std::invalid_argument.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rfo
