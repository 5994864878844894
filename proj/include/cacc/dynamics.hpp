#pragma once

// Longitudinal force balance and the per-step acceleration feasibility
// envelope. Everything here is SI internally; the km/h forms used by the
// rolling-resistance and tractive-power terms are converted at the boundary.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cacc/units.hpp"

namespace cacc {

struct VehicleParams {
  double mass_kg = 1500.0;
  double tractive_axle_mass_kg = 900.0;
  double power_kw = 150.0;
  double driveline_efficiency = 0.90;
  double adhesion = 0.6;  // mu
  double air_density = 1.2256;
  double drag_coefficient = 0.28;
  double altitude_factor = 1.0;
  double frontal_area_m2 = 2.3;
  double rolling_c0 = 1.75;
  double rolling_c1 = 0.0328;  // h/km
  double rolling_c2 = 4.575;
  double braking_efficiency = 0.9;
  double desired_decel = 3.0;  // b_desired, m/s^2, positive
  double gravity = kStandardGravity;

  // Power-based fuel model FC = a0 + a1 P + a2 P^2 + a3 v. These defaults are
  // synthetic placeholders of plausible magnitude, not a calibrated vehicle.
  double fuel_alpha0 = 2.5e-4;  // L/s
  double fuel_alpha1 = 1.0e-4;  // L/(s kW)
  double fuel_alpha2 = 1.0e-7;  // L/(s kW^2)
  double fuel_alpha3 = 0.0;     // L/m

  bool operator==(const VehicleParams&) const = default;
};

/// Violated invariants of `p`, one human-readable message each. Empty when valid.
inline std::vector<std::string> params_problems(const VehicleParams& p) {
  std::vector<std::string> out;
  auto positive = [&](double v, const char* name) {
    if (!(v > 0.0)) out.push_back(std::string(name) + " must be > 0");
  };
  positive(p.mass_kg, "mass_kg");
  positive(p.tractive_axle_mass_kg, "tractive_axle_mass_kg");
  positive(p.power_kw, "power_kw");
  positive(p.frontal_area_m2, "frontal_area_m2");
  positive(p.desired_decel, "desired_decel");
  positive(p.gravity, "gravity");
  positive(p.adhesion, "adhesion");
  positive(p.air_density, "air_density");
  if (!(p.driveline_efficiency > 0.0 && p.driveline_efficiency <= 1.0))
    out.push_back("driveline_efficiency must be in (0, 1]");
  if (!(p.braking_efficiency > 0.0 && p.braking_efficiency <= 1.0))
    out.push_back("braking_efficiency must be in (0, 1]");
  if (p.tractive_axle_mass_kg > p.mass_kg)
    out.push_back("tractive_axle_mass_kg must be <= mass_kg");
  if (p.drag_coefficient < 0.0 || p.altitude_factor < 0.0)
    out.push_back("drag_coefficient and altitude_factor must be >= 0");
  if (p.rolling_c0 < 0.0 || p.rolling_c1 < 0.0 || p.rolling_c2 < 0.0)
    out.push_back("rolling resistance constants must be >= 0");
  return out;
}

struct GradeContext {
  double grade = 0.0;  // rise over run, signed

  static constexpr double kMaxAbsGrade = 0.25;
  bool plausible(double bound = kMaxAbsGrade) const { return std::abs(grade) < bound; }
};

struct AccelEnvelope {
  double a_max = 0.0;        // may be <= 0 on steep upgrades
  double a_min = 0.0;        // <= 0, physical braking limit
  double a_collision = 0.0;  // <= 0, braking required to avoid the leader

  bool traction_limited() const { return a_max <= 0.0; }
};

struct ResistanceForces {
  double aero = 0.0;
  double rolling = 0.0;
  double grade = 0.0;

  double total() const { return aero + rolling + grade; }
};

/// Speeds below this are treated as this value in the power-limited branch.
inline constexpr double kTractionSpeedFloor = 0.1;  // m/s

inline double tractive_force(const VehicleParams& p, double v) {
  const double power_limited =
      1000.0 * p.driveline_efficiency * p.power_kw / std::max(v, kTractionSpeedFloor);
  const double friction_limited = p.tractive_axle_mass_kg * p.gravity * p.adhesion;
  return std::min(power_limited, friction_limited);
}

inline double aero_resistance(const VehicleParams& p, double v) {
  return 0.5 * p.air_density * p.drag_coefficient * p.altitude_factor * p.frontal_area_m2 * v * v;
}

inline ResistanceForces resistance_forces(const VehicleParams& p, double v, GradeContext ctx) {
  ResistanceForces r;
  r.aero = aero_resistance(p, v);
  // Normal load on a grade is m g cos(theta); identical to m g on the flat.
  const double cos_theta = std::cos(std::atan(ctx.grade));
  r.rolling = p.mass_kg * p.gravity * cos_theta * p.rolling_c0 / 1000.0 *
              (p.rolling_c1 * mps_to_kmh(v) + p.rolling_c2);
  r.grade = p.mass_kg * p.gravity * ctx.grade;
  return r;
}

/// a_collision = -b_kin^2 / (b_desired + g G). Throws ModelError when the
/// denominator is non-positive (downgrade steeper than the braking budget).
inline double collision_decel(const VehicleParams& p, GradeContext ctx, double b_kin) {
  const double denom = p.desired_decel + p.gravity * ctx.grade;
  if (!(denom > 0.0))
    throw ModelError("b_desired + g*G must be > 0 (got " + std::to_string(denom) + ")");
  if (b_kin == 0.0) return 0.0;
  return -(b_kin * b_kin) / denom;
}

inline AccelEnvelope accel_envelope(const VehicleParams& p, double v, GradeContext ctx, double b_kin) {
  AccelEnvelope env;
  env.a_collision = collision_decel(p, ctx, b_kin);
  env.a_max = (tractive_force(p, v) - resistance_forces(p, v, ctx).total()) / p.mass_kg;
  env.a_min = -(ctx.grade + 1.0) * p.gravity * p.adhesion * p.braking_efficiency;
  return env;
}

/// Deceleration the follower needs to match the leader's speed within the
/// available gap. Zero when not closing.
inline double kinematic_decel(double x_follower, double v_follower, double x_lead, double v_lead,
                              double jam_spacing) {
  const double gap = x_lead - x_follower - jam_spacing;
  if (!(gap > 0.0))
    throw ModelError("kinematic_decel: non-positive gap " + std::to_string(gap) +
                     " m (vehicles overlap)");
  const double delta = v_follower * v_follower - v_lead * v_lead;
  return (delta + std::sqrt(delta * delta)) / (4.0 * gap);
}

struct ClampResult {
  double accel = 0.0;
  bool infeasible = false;  // a_collision < a_min: braking demand exceeds physics
};

inline ClampResult clamp_accel(double candidate, const AccelEnvelope& env) {
  if (candidate > 0.0) return {std::max(std::min(candidate, env.a_max), env.a_min), false};
  if (env.a_collision < env.a_min) return {env.a_min, true};
  return {std::min(std::max(candidate, env.a_min), env.a_collision), false};
}

}  // namespace cacc
