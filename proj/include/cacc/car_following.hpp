#pragma once

// Rakha-Pasumarthy-Adjerid car-following speed governor and the Van Aerde
// steady-state relation it is built on. The Van Aerde constants only make
// sense in km/h and km, so branch (ii) is evaluated in those units and
// converted back to SI at the edge of each function.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cacc/units.hpp"

namespace cacc {

struct LinkFundamental {
  double free_flow_kmh = 100.0;
  double capacity_speed_kmh = 85.0;
  double saturation_flow_vphpl = 2480.0;
  double jam_density_vpkmpl = 180.0;
  double grade = 0.0;
  double length_m = 500.0;

  double free_flow_mps() const { return kmh_to_mps(free_flow_kmh); }
  double jam_spacing_m() const { return 1000.0 / jam_density_vpkmpl; }
  double saturation_headway_s() const { return 3600.0 / saturation_flow_vphpl; }

  bool operator==(const LinkFundamental&) const = default;
};

struct VanAerdeConstants {
  double c1 = 0.0;  // km
  double c2 = 0.0;  // km^2/h
  double c3 = 0.0;  // h
};

inline VanAerdeConstants van_aerde_constants(const LinkFundamental& f) {
  if (!(f.free_flow_kmh > 0.0 && f.capacity_speed_kmh > 0.0 && f.saturation_flow_vphpl > 0.0 &&
        f.jam_density_vpkmpl > 0.0))
    throw ModelError("fundamental diagram parameters must be positive");
  const double vf = f.free_flow_kmh;
  const double vc = f.capacity_speed_kmh;
  const double m = vf / (f.jam_density_vpkmpl * vc * vc);
  VanAerdeConstants k;
  k.c1 = m * (2.0 * vc - vf);
  k.c2 = m * (vc - vf) * (vc - vf);
  k.c3 = 1.0 / f.saturation_flow_vphpl - m;
  if (k.c3 <= 0.0)
    throw ModelError("inconsistent fundamental diagram: c3 = " + std::to_string(k.c3) + " h <= 0");
  if (k.c1 < 0.0)
    throw ModelError("inconsistent fundamental diagram: c1 = " + std::to_string(k.c1) +
                     " km < 0 (v_c < v_f/2)");
  return k;
}

/// Link-level problems that make the fundamental diagram unusable.
inline std::vector<std::string> fundamental_problems(const LinkFundamental& f) {
  std::vector<std::string> out;
  if (!(f.capacity_speed_kmh > 0.0 && f.capacity_speed_kmh < f.free_flow_kmh))
    out.push_back("capacity_speed_kmh must satisfy 0 < v_c < v_f");
  if (!(f.saturation_flow_vphpl > 0.0)) out.push_back("saturation_flow_vphpl must be > 0");
  if (!(f.jam_density_vpkmpl > 0.0)) out.push_back("jam_density_vpkmpl must be > 0");
  if (!(f.length_m > 0.0)) out.push_back("length_m must be > 0");
  if (out.empty()) {
    try {
      (void)van_aerde_constants(f);
    } catch (const ModelError& e) {
      out.emplace_back(e.what());
    }
  }
  return out;
}

/// Equilibrium front-to-front spacing (km) at speed v (km/h).
inline double steady_state_spacing(const VanAerdeConstants& k, const LinkFundamental& f, double v_kmh) {
  if (v_kmh < 0.0) throw ModelError("steady_state_spacing: negative speed");
  if (v_kmh >= f.free_flow_kmh)
    throw ModelError("steady_state_spacing: speed at or above free-flow speed has no finite spacing");
  return k.c1 + k.c2 / (f.free_flow_kmh - v_kmh) + k.c3 * v_kmh;
}

/// Spacing one step ahead assuming the follower holds its speed and the
/// leader keeps its current acceleration.
inline double project_spacing(double spacing, double v_follower, double v_lead, double a_lead, double dt) {
  return spacing + (v_lead - v_follower) * dt + 0.5 * a_lead * dt * dt;
}

struct LeadState {
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
};

inline constexpr double kRadicandTolerance = 1e-9;

/// Speed (km/h) on the congested Van Aerde branch for spacing s (km): the
/// smaller root of s = c1 + c2/(v_f - v) + c3 v. Negative for s below jam spacing.
inline double van_aerde_speed(const VanAerdeConstants& k, double vf, double s_km) {
  const double b = k.c1 - k.c3 * vf - s_km;
  const double c = s_km * vf - k.c1 * vf - k.c2;
  double disc = b * b - 4.0 * k.c3 * c;
  if (disc < 0.0) {
    if (disc < -kRadicandTolerance)
      throw ModelError("Van Aerde discriminant negative (" + std::to_string(disc) + ")");
    disc = 0.0;
  }
  const double root = std::sqrt(disc);
  // (-b - root) / (2 c3) rewritten to avoid cancellation when s is large.
  const double denom = -b + root;
  if (denom > 0.0) return 2.0 * c / denom;
  return (-b - root) / (2.0 * k.c3);
}

struct RpaBranches {
  double accel_limited = 0.0;  // m/s
  double steady_state = std::numeric_limits<double>::infinity();
  double collision_free = std::numeric_limits<double>::infinity();

  double min() const { return std::min({accel_limited, steady_state, collision_free}); }
};

struct RpaOptions {
  // Cooperative followers hold their gap with the time-gap controller, so the
  // human steady-state branch is switched off for them.
  bool steady_state_branch = true;
};

inline RpaBranches rpa_branches(double v, const std::optional<LeadState>& lead, double x,
                                const LinkFundamental& f, const VanAerdeConstants& k,
                                double a_max, double b_desired, double dt, RpaOptions opt = {}) {
  if (!(dt > 0.0)) throw ModelError("rpa_speed: dt must be > 0");
  RpaBranches out;
  out.accel_limited = v + a_max * dt;
  if (!lead) return out;

  const double s_next = project_spacing(lead->x - x, v, lead->v, lead->a, dt);
  if (opt.steady_state_branch)
    out.steady_state = kmh_to_mps(van_aerde_speed(k, f.free_flow_kmh, m_to_km(s_next)));
  const double v_lead_next = std::max(lead->v + lead->a * dt, 0.0);
  const double radicand = v_lead_next * v_lead_next + 2.0 * b_desired * (s_next - f.jam_spacing_m());
  out.collision_free = std::sqrt(std::max(radicand, 0.0));
  return out;
}

/// Next-step speed cap (m/s). Never negative; without a leader also capped at v_f.
inline double rpa_speed(double v, const std::optional<LeadState>& lead, double x, const LinkFundamental& f,
                        const VanAerdeConstants& k, double a_max, double b_desired, double dt,
                        RpaOptions opt = {}) {
  double next = rpa_branches(v, lead, x, f, k, a_max, b_desired, dt, opt).min();
  if (!lead) next = std::min(next, f.free_flow_mps());
  return std::max(next, 0.0);
}

inline double rpa_speed(double v, const std::optional<LeadState>& lead, double x, const LinkFundamental& f,
                        double a_max, double b_desired, double dt, RpaOptions opt = {}) {
  return rpa_speed(v, lead, x, f, van_aerde_constants(f), a_max, b_desired, dt, opt);
}

}  // namespace cacc
