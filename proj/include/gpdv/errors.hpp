#pragma once

#include <stdexcept>
#include <string>

namespace gpdv {

/// Bad user input: dimension mismatches, malformed files, invalid config.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A trend basis with linearly dependent columns on the active set.
class AssemblyError : public InputError {
 public:
  using InputError::InputError;
};

/// Loss of numerical soundness: failed factorization, vanishing Schur pivot,
/// or a significantly negative variance.
class NumericalBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FactorizationError : public NumericalBreakdown {
 public:
  using NumericalBreakdown::NumericalBreakdown;
};

}  // namespace gpdv
