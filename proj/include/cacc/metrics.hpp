#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>

#include "cacc/dynamics.hpp"
#include "cacc/platooning.hpp"

namespace cacc {

/// Force the powertrain must deliver (N). `drag_factor` scales the
/// aerodynamic term only; 1.0 reproduces the plain model.
inline double effective_force(const VehicleParams& p, double v, double a, GradeContext ctx,
                              double drag_factor = 1.0) {
  const double cos_theta = std::cos(std::atan(ctx.grade));
  const double mg = p.mass_kg * p.gravity;
  return mg * ctx.grade + mg * cos_theta * p.rolling_c0 * p.rolling_c2 / 1000.0 + p.mass_kg * a +
         mg * cos_theta * p.rolling_c0 * p.rolling_c1 * mps_to_kmh(v) / 1000.0 +
         drag_factor * aero_resistance(p, v);
}

/// kW
inline double instantaneous_power(double force_n, double v) { return force_n * v / 1000.0; }

/// L/s. Negative power (coasting, braking) burns no more than idle.
inline double fuel_rate(const VehicleParams& p, double power_kw, double v, bool clamp_negative_power = true) {
  const double pw = clamp_negative_power ? std::max(power_kw, 0.0) : power_kw;
  const double fc = p.fuel_alpha0 + p.fuel_alpha1 * pw + p.fuel_alpha2 * pw * pw + p.fuel_alpha3 * v;
  return std::max(fc, p.fuel_alpha0);
}

/// Seconds of delay accrued over one step; speeds above v_f accrue nothing.
inline double delay_increment(double v, double v_free, double dt) {
  return std::max(v_free - v, 0.0) / v_free * dt;
}

struct MetricsRecord {
  VehicleId vehicle = 0;
  VehicleClass cls = VehicleClass::kConventional;
  double entry_s = 0.0;
  double travel_time_s = 0.0;
  double delay_s = 0.0;
  double fuel_l = 0.0;
  double distance_m = 0.0;
  double platoon_time_s = 0.0;
  bool completed = false;
};

struct ClassMeans {
  std::size_t trips = 0;
  double travel_time_s = 0.0;
  double delay_s = 0.0;
  double fuel_l = 0.0;
};

struct FleetSummary {
  ClassMeans fleet;
  ClassMeans cacc;
  ClassMeans conventional;
};

class EmptyFleetError : public std::runtime_error {
 public:
  EmptyFleetError() : std::runtime_error("aggregate: no completed trips") {}
};

inline FleetSummary aggregate(std::span<const MetricsRecord> records) {
  FleetSummary s;
  auto add = [](ClassMeans& m, const MetricsRecord& r) {
    ++m.trips;
    m.travel_time_s += r.travel_time_s;
    m.delay_s += r.delay_s;
    m.fuel_l += r.fuel_l;
  };
  for (const auto& r : records) {
    if (!r.completed) continue;
    add(s.fleet, r);
    add(r.cls == VehicleClass::kCacc ? s.cacc : s.conventional, r);
  }
  if (s.fleet.trips == 0) throw EmptyFleetError();
  for (ClassMeans* m : {&s.fleet, &s.cacc, &s.conventional}) {
    if (m->trips == 0) continue;
    const double n = static_cast<double>(m->trips);
    m->travel_time_s /= n;
    m->delay_s /= n;
    m->fuel_l /= n;
  }
  return s;
}

/// Percent change relative to `baseline`; reductions come out negative.
inline double change_pct(double baseline, double treatment) {
  if (baseline == 0.0) return 0.0;
  return (treatment - baseline) / baseline * 100.0;
}

struct FleetChange {
  double travel_time_pct = 0.0;
  double delay_pct = 0.0;
  double fuel_pct = 0.0;
};

inline FleetChange compare(const ClassMeans& baseline, const ClassMeans& treatment) {
  return {change_pct(baseline.travel_time_s, treatment.travel_time_s),
          change_pct(baseline.delay_s, treatment.delay_s), change_pct(baseline.fuel_l, treatment.fuel_l)};
}

}  // namespace cacc
