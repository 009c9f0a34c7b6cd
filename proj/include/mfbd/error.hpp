#pragma once

#include <stdexcept>
#include <string>

namespace mfbd {

/// Argument outside the mathematical domain of an operation (state index,
/// MGF argument beyond its abscissa of convergence, degree past a finite
/// family, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A simulation would exceed the configured event or memory budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An identity or statistical check failed.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace exit_code {
inline constexpr int kSuccess = 0;
inline constexpr int kInternal = 1;
inline constexpr int kConfig = 2;
inline constexpr int kDomain = 3;
inline constexpr int kValidation = 4;
inline constexpr int kResource = 5;
}  // namespace exit_code

}  // namespace mfbd
