#pragma once

#include <stdexcept>
#include <string>

namespace tvtp {

// Parameter or input outside the model's domain (sigma <= 0, |rho| >= 1,
// non-finite covariate, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Floating-point breakdown: total underflow, singular matrices, non-finite
// objective inside a finite-difference stencil.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An enumeration guard was exceeded.
class SizeError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Every optimizer start failed.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file or configuration document.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tvtp
