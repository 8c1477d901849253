#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace carle {

/// Invalid configuration value (sigma <= 0, bad knee, f_max above Nyquist, ...).
class ParameterError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or missing input data (empty signals, width mismatches, bad CSV).
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A window whose statistics are undefined (zero variance, zero energy).
class DegenerateWindowError : public std::runtime_error {
public:
  explicit DegenerateWindowError(const std::string& what, std::ptrdiff_t window_index = -1)
      : std::runtime_error(window_index < 0 ? what
                                            : "window " + std::to_string(window_index) + ": " + what),
        window_index_(window_index) {}

  std::ptrdiff_t window_index() const noexcept { return window_index_; }

private:
  std::ptrdiff_t window_index_;
};

/// Non-finite values during training or inference.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace carle
