#pragma once

#include <stdexcept>
#include <string>

namespace cacc {

inline constexpr double kStandardGravity = 9.8066;  // m/s^2

constexpr double kmh_to_mps(double kmh) { return kmh / 3.6; }
constexpr double mps_to_kmh(double mps) { return mps * 3.6; }
constexpr double km_to_m(double km) { return km * 1000.0; }
constexpr double m_to_km(double m) { return m / 1000.0; }

/// Raised when model inputs are physically or algebraically inconsistent
/// (degenerate fundamental diagram, overlapping vehicles, ...).
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cacc
