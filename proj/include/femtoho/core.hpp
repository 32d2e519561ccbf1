#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace femtoho {

// Bandwidth is carried as real-valued kbps throughout.
using Kbps = double;
using Seconds = double;

using CallId = std::uint64_t;
using MacroId = std::uint32_t;
using VehicleId = std::uint32_t;

// Comparison slack for bandwidth arithmetic.
inline constexpr Kbps kBandwidthTolerance = 1e-6;

// Invalid scenario, traffic, or oracle parameters.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A ledger or registry was asked to do something its state forbids
// (duplicate id, unknown id, contract violation by the caller).
class ConsistencyError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace femtoho
