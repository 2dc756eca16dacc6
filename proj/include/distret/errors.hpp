#pragma once

#include <stdexcept>

namespace distret {

/// Invalid dimensions, shapes or configuration values.
struct parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input outside the mathematical domain of an operation, e.g. a quantile of a
/// signed measure or a metric between measures of different total mass.
struct domain_error : std::domain_error {
  using std::domain_error::domain_error;
};

/// Target policy puts mass on an action the behavior policy never takes.
struct support_error : std::domain_error {
  using std::domain_error::domain_error;
};

/// Configuration the exact enumerator cannot represent.
struct unsupported_error : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace distret
