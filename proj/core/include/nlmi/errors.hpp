#pragma once

#include <stdexcept>
#include <string>

namespace nlmi {

/// Incompatible tensor shapes or graph/layer widths.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf values, failed gradient checks, diverged training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid generator parameters, config files or CLI arguments.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or version-mismatched dataset/checkpoint files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nlmi
