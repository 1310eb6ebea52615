#pragma once

#include <stdexcept>
#include <string>

namespace xtalk {

// Invalid configuration: bad presets, out-of-range knobs, malformed config files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation called with arguments outside its domain.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Data carries no usable information: constant spectra, all-zero design
// matrices, and similar.
class DegenerateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace xtalk
