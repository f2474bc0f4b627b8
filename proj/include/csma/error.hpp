#pragma once

#include <stdexcept>
#include <string>

namespace csma {

// Invalid scenario configuration (bad topology, rates, modes, JSON schema).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A statistic requested over too few data points.
struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace csma
