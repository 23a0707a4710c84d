#pragma once

#include <stdexcept>
#include <string>

namespace g2l {

// Precondition violated by a caller-supplied value (bad index, zero norm, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Exact enumeration requested beyond its bound.
struct CapacityError : std::length_error {
  using std::length_error::length_error;
};

// Malformed dataset / checkpoint / game file.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss during training.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, std::size_t epoch, std::size_t step)
      : std::runtime_error(what), epoch(epoch), step(step) {}
  std::size_t epoch;
  std::size_t step;
};

}  // namespace g2l
