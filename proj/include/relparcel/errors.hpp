#ifndef RELPARCEL_ERRORS_HPP
#define RELPARCEL_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace relparcel {

/// Tensor shapes that do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an operation precondition (non-scalar loss, L < 2, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid configuration values or an unreadable config file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing, corrupt or inconsistent on-disk data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace relparcel

#endif  // RELPARCEL_ERRORS_HPP
