#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cacc/car_following.hpp"
#include "cacc/dynamics.hpp"
#include "cacc/platooning.hpp"

namespace cacc {

/// Platooning configurations. kNone disables platooning entirely.
enum class Preset { kNone, kA, kB, kC, kD, kE };

inline std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::kNone: return "none";
    case Preset::kA: return "A";
    case Preset::kB: return "B";
    case Preset::kC: return "C";
    case Preset::kD: return "D";
    case Preset::kE: return "E";
  }
  return "none";
}

inline std::optional<Preset> preset_from_string(std::string_view s) {
  if (s == "none") return Preset::kNone;
  if (s == "A") return Preset::kA;
  if (s == "B") return Preset::kB;
  if (s == "C") return Preset::kC;
  if (s == "D") return Preset::kD;
  if (s == "E") return Preset::kE;
  return std::nullopt;
}

struct PresetTraits {
  int platooning_lanes = 0;  // the N leftmost lanes (lane 0 is leftmost); -1 = all
  bool capped = false;
  bool disconnected_links = false;
};

inline PresetTraits preset_traits(Preset p) {
  switch (p) {
    case Preset::kNone: return {0, false, false};
    case Preset::kA: return {-1, false, false};
    case Preset::kB: return {-1, true, true};
    case Preset::kC: return {1, false, false};
    case Preset::kD: return {1, true, true};
    case Preset::kE: return {2, true, true};
  }
  return {};
}

inline constexpr int kDefaultPlatoonCap = 22;

struct ScenarioConfig {
  int lanes = 2;
  std::vector<LinkFundamental> links{LinkFundamental{}};
  VehicleParams vehicle;
  ControllerParams controller;
  Preset preset = Preset::kE;
  double demand_vphpl = 1800.0;
  double mpr = 0.0;  // fraction of CACC-equipped vehicles
  double cacc_lane_preference = 0.5;
  double follower_drag_factor = 1.0;
  bool clamp_negative_power = true;
  double duration_s = 3600.0;
  double dt_s = 0.1;
  std::uint64_t seed = 1;

  bool is_platooning_lane(int lane) const {
    const int n = preset_traits(preset).platooning_lanes;
    return n < 0 ? true : lane < n;
  }
  bool disconnected_links() const { return preset_traits(preset).disconnected_links; }
  double corridor_length_m() const {
    double total = 0.0;
    for (const auto& l : links) total += l.length_m;
    return total;
  }

  bool operator==(const ScenarioConfig&) const = default;
};

/// Sets the platoon cap implied by the preset (22 for B/D/E, unlimited otherwise).
inline void apply_preset_defaults(ScenarioConfig& c) {
  c.controller.max_platoon_size =
      preset_traits(c.preset).capped ? std::optional<int>(kDefaultPlatoonCap) : std::nullopt;
}

struct ConfigProblem {
  std::string field;
  std::string message;
};

inline std::vector<ConfigProblem> config_problems(const ScenarioConfig& c) {
  std::vector<ConfigProblem> out;
  auto bad = [&out](std::string field, std::string msg) { out.push_back({std::move(field), std::move(msg)}); };
  if (c.lanes < 1) bad("corridor.lanes", "must be >= 1");
  if (c.links.empty()) bad("corridor.links", "at least one link is required");
  for (std::size_t i = 0; i < c.links.size(); ++i) {
    for (auto& msg : fundamental_problems(c.links[i])) bad("corridor.links[" + std::to_string(i) + "]", msg);
    if (!GradeContext{c.links[i].grade}.plausible())
      bad("corridor.links[" + std::to_string(i) + "].grade", "|grade| must be < 0.25");
    else if (!(c.vehicle.desired_decel + c.vehicle.gravity * c.links[i].grade > 0.0))
      bad("corridor.links[" + std::to_string(i) + "].grade", "b_desired + g*grade must be > 0");
  }
  for (auto& msg : params_problems(c.vehicle)) bad("vehicle", msg);
  const auto& k = c.controller;
  if (!(k.time_gap_s > 0.0)) bad("controller.time_gap_s", "h_des must be > 0");
  if (!(k.gain_per_s > 0.0)) bad("controller.gain_per_s", "lambda must be > 0");
  if (!(k.jam_spacing_m > 0.0)) bad("controller.jam_spacing_m", "s_j must be > 0");
  if (!(k.join_boost >= 1.0)) bad("controller.join_boost", "must be >= 1");
  if (!(k.join_window_s > 0.0)) bad("controller.join_window_s", "must be > 0");
  if (!(k.join_threshold_m > 0.0)) bad("controller.join_threshold_m", "must be > 0");
  if (!(k.detection_range_m > 0.0)) bad("controller.detection_range_m", "must be > 0");
  if (k.max_platoon_size && *k.max_platoon_size < 2) bad("controller.max_platoon_size", "must be >= 2 (or 0 for unlimited)");
  if (!(c.demand_vphpl >= 0.0)) bad("demand.flow_vphpl", "must be >= 0");
  if (!(c.mpr >= 0.0 && c.mpr <= 1.0)) bad("demand.mpr", "must be in [0, 1]");
  if (!(c.cacc_lane_preference >= 0.0 && c.cacc_lane_preference <= 1.0))
    bad("demand.cacc_lane_preference", "must be in [0, 1]");
  if (!(c.follower_drag_factor > 0.0)) bad("metrics.follower_drag_factor", "must be > 0");
  if (!(c.duration_s >= 0.0)) bad("sim.duration_s", "must be >= 0");
  if (!(c.dt_s > 0.0 && c.dt_s <= 1.0)) bad("sim.dt_s", "must be in (0, 1]");
  return out;
}

/// Non-fatal remarks (demand above saturation flow, ...).
inline std::vector<ConfigProblem> config_warnings(const ScenarioConfig& c) {
  std::vector<ConfigProblem> out;
  for (std::size_t i = 0; i < c.links.size(); ++i)
    if (c.demand_vphpl > c.links[i].saturation_flow_vphpl)
      out.push_back({"demand.flow_vphpl", "exceeds saturation flow of link " + std::to_string(i)});
  return out;
}

}  // namespace cacc
