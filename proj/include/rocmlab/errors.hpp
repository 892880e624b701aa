#pragma once

#include <stdexcept>

namespace rocmlab {

/// Invalid user configuration (unknown kinds, missing files, bad ranges).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite losses, gradients or ODE states.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rocmlab
