#pragma once

#include <stdexcept>
#include <string>

namespace robustlin {

// Preconditions on caller-supplied values (dimension mismatch, NaN input, ...).
struct invalid_input : std::invalid_argument {
  explicit invalid_input(const std::string& what) : std::invalid_argument(what) {}
};

// Inverse DFT asked to produce a real vector from a spectrum that is not
// Hermitian within tolerance.
struct symmetry_violation : std::runtime_error {
  explicit symmetry_violation(const std::string& what) : std::runtime_error(what) {}
};

// File could not be parsed into the expected schema.
struct malformed_file : std::runtime_error {
  explicit malformed_file(const std::string& what) : std::runtime_error(what) {}
};

struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged (non-finite risk) under a fixed step size.
struct step_size_too_large : std::runtime_error {
  explicit step_size_too_large(const std::string& what) : std::runtime_error(what) {}
};

// An iterative solver hit its ceiling without certifying its answer.
struct solver_failure : std::runtime_error {
  explicit solver_failure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace robustlin
