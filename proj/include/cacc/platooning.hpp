#pragma once

// Constant time-gap CACC law and the dynamic platoon lifecycle.
//
// The lifecycle is split in two halves so that the decision logic stays a
// pure function of a lane snapshot: platoon_scan() decides what happens and
// returns the events; apply_event() performs the bookkeeping. The scan
// replays its own events on a private copy so later vehicles in the lane see
// the effect of earlier decisions within the same scan.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string_view>
#include <vector>

#include "cacc/units.hpp"

namespace cacc {

using VehicleId = std::uint64_t;
using PlatoonId = std::uint64_t;
inline constexpr PlatoonId kNoPlatoon = 0;

enum class VehicleClass : int { kConventional = 1, kCacc = 2 };

enum class Role { kUnattached, kLeader, kFollower };

struct ControllerParams {
  double time_gap_s = 0.6;
  double gain_per_s = 0.5;
  double jam_spacing_m = 1000.0 / 180.0;
  double join_boost = 1.07;
  double join_window_s = 6.5;
  std::optional<int> max_platoon_size = 22;  // nullopt = unlimited
  double join_threshold_m = 0.5;
  double detection_range_m = 120.0;
  // Reproduces the printed (unstable) sign of the control law.
  bool paper_literal_sign = false;

  bool operator==(const ControllerParams&) const = default;
};

/// Distance-gap error of the constant time-gap policy (m). Positive means the
/// follower is further back than the policy asks for.
inline double gap_error(double x_follower, double v_follower, double x_lead, const ControllerParams& c) {
  return (x_lead - x_follower - c.jam_spacing_m) - c.time_gap_s * v_follower;
}

/// Acceleration that makes de/dt = -lambda e hold exactly along the
/// continuous-time trajectory. Raw candidate, not yet envelope-clamped.
inline double cacc_accel(double x_follower, double v_follower, double x_lead, double v_lead,
                         const ControllerParams& c) {
  const double e = gap_error(x_follower, v_follower, x_lead, c);
  const double feedback = c.paper_literal_sign ? -c.gain_per_s * e : c.gain_per_s * e;
  return (feedback + v_lead - v_follower) / c.time_gap_s;
}

inline double join_target_speed(double v_limit, bool attempt_active, const ControllerParams& c) {
  return attempt_active ? c.join_boost * v_limit : v_limit;
}

// --- lifecycle -------------------------------------------------------------

struct JoinAttempt {
  VehicleId vehicle = 0;
  PlatoonId target = kNoPlatoon;
  double start_s = 0.0;
  int elapsed_steps = 0;

  double elapsed_s(double dt) const { return elapsed_steps * dt; }
};

/// Per-vehicle platoon bookkeeping.
struct PlatoonTag {
  PlatoonId platoon = kNoPlatoon;
  Role role = Role::kUnattached;
  std::optional<JoinAttempt> join;
  PlatoonId refused = kNoPlatoon;  // last platoon that refused or timed out a join
};

struct PlatoonState {
  PlatoonId id = kNoPlatoon;
  std::vector<VehicleId> members;  // front to rear; members.front() leads
  int lane = 0;
  double created_s = 0.0;

  std::size_t size() const { return members.size(); }
  VehicleId leader() const { return members.front(); }
  VehicleId tail() const { return members.back(); }
};

struct PlatoonRegistry {
  std::map<PlatoonId, PlatoonState> platoons;
  PlatoonId next_id = 1;

  const PlatoonState* find(PlatoonId id) const {
    auto it = platoons.find(id);
    return it == platoons.end() ? nullptr : &it->second;
  }
  PlatoonState* find(PlatoonId id) {
    auto it = platoons.find(id);
    return it == platoons.end() ? nullptr : &it->second;
  }
};

enum class LifecycleKind {
  kForm,
  kJoinStart,
  kJoinCommit,
  kJoinAbort,
  kSplitCap,
  kSplitBoundary,
  kSplitExit,
};

inline std::string_view to_string(LifecycleKind k) {
  switch (k) {
    case LifecycleKind::kForm: return "FORM";
    case LifecycleKind::kJoinStart: return "JOIN_START";
    case LifecycleKind::kJoinCommit: return "JOIN_COMMIT";
    case LifecycleKind::kJoinAbort: return "JOIN_ABORT";
    case LifecycleKind::kSplitCap: return "SPLIT_CAP";
    case LifecycleKind::kSplitBoundary: return "SPLIT_BOUNDARY";
    case LifecycleKind::kSplitExit: return "SPLIT_EXIT";
  }
  return "UNKNOWN";
}

struct LifecycleEvent {
  double t = 0.0;
  LifecycleKind kind = LifecycleKind::kForm;
  VehicleId vehicle = 0;
  PlatoonId platoon = kNoPlatoon;  // platoon created, targeted, joined or left
  int lane = 0;
  double x = 0.0;

  bool operator==(const LifecycleEvent&) const = default;
};

/// Removes `vehicle` from `platoon`, promoting the next member to leader.
/// A platoon left empty is erased.
template <class TagOf>
void detach_member(PlatoonRegistry& reg, PlatoonId platoon, VehicleId vehicle, TagOf&& tag_of) {
  PlatoonState* p = reg.find(platoon);
  if (p == nullptr) return;
  std::erase(p->members, vehicle);
  if (p->members.empty()) {
    reg.platoons.erase(platoon);
    return;
  }
  PlatoonTag& lead = tag_of(p->leader());
  lead.role = Role::kLeader;
}

/// Applies one lifecycle event. `tag_of(id)` must return a mutable reference
/// to the vehicle's PlatoonTag.
template <class TagOf>
void apply_event(const LifecycleEvent& ev, PlatoonRegistry& reg, TagOf&& tag_of) {
  PlatoonTag& tag = tag_of(ev.vehicle);
  switch (ev.kind) {
    case LifecycleKind::kForm: {
      PlatoonState p;
      p.id = ev.platoon;
      p.members = {ev.vehicle};
      p.lane = ev.lane;
      p.created_s = ev.t;
      reg.platoons[p.id] = std::move(p);
      reg.next_id = std::max(reg.next_id, ev.platoon + 1);
      tag.platoon = ev.platoon;
      tag.role = Role::kLeader;
      tag.join.reset();
      break;
    }
    case LifecycleKind::kJoinStart: {
      if (tag.platoon != kNoPlatoon) detach_member(reg, tag.platoon, ev.vehicle, tag_of);
      tag.platoon = kNoPlatoon;
      tag.role = Role::kUnattached;
      tag.join = JoinAttempt{ev.vehicle, ev.platoon, ev.t, 0};
      break;
    }
    case LifecycleKind::kJoinCommit: {
      if (PlatoonState* p = reg.find(ev.platoon)) p->members.push_back(ev.vehicle);
      tag.platoon = ev.platoon;
      tag.role = Role::kFollower;
      tag.join.reset();
      break;
    }
    case LifecycleKind::kJoinAbort:
    case LifecycleKind::kSplitCap: {
      tag.refused = ev.platoon;
      tag.join.reset();
      break;
    }
    case LifecycleKind::kSplitBoundary:
    case LifecycleKind::kSplitExit: {
      detach_member(reg, ev.platoon, ev.vehicle, tag_of);
      tag.platoon = kNoPlatoon;
      tag.role = Role::kUnattached;
      tag.join.reset();
      break;
    }
  }
}

/// Snapshot of one vehicle as seen by the lifecycle scan.
struct LaneMember {
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::kConventional;
  double x = 0.0;
  double v = 0.0;
  int link = 0;
  bool crossed_link = false;  // entered a new link during the last step
  PlatoonTag tag;
};

struct ScanContext {
  double now = 0.0;
  double dt = 0.1;
  int lane = 0;
  bool disconnected_links = false;  // presets B/D/E: platoons never span links
};

/// Lifecycle decisions for one platooning lane. `lane` is ordered front to
/// rear. Inputs are taken by value and never mutated from the caller's view.
inline std::vector<LifecycleEvent> platoon_scan(std::vector<LaneMember> lane, PlatoonRegistry reg,
                                                const ControllerParams& ctrl, const ScanContext& ctx) {
  std::vector<LifecycleEvent> events;
  auto tag_of = [&lane](VehicleId id) -> PlatoonTag& {
    for (auto& m : lane)
      if (m.id == id) return m.tag;
    throw ModelError("platoon_scan: vehicle " + std::to_string(id) + " not in lane snapshot");
  };
  auto emit = [&](LifecycleKind kind, const LaneMember& m, PlatoonId platoon) {
    LifecycleEvent ev{ctx.now, kind, m.id, platoon, ctx.lane, m.x};
    apply_event(ev, reg, tag_of);
    events.push_back(ev);
  };
  auto form = [&](const LaneMember& m) { emit(LifecycleKind::kForm, m, reg.next_id); };
  auto at_cap = [&](const PlatoonState& p) {
    return ctrl.max_platoon_size && static_cast<int>(p.size()) >= *ctrl.max_platoon_size;
  };
  const double window_eps = 1e-9;

  for (std::size_t i = 0; i < lane.size(); ++i) {
    LaneMember& m = lane[i];
    if (m.cls != VehicleClass::kCacc) continue;
    const LaneMember* pred = i > 0 ? &lane[i - 1] : nullptr;
    const bool pred_in_range = pred != nullptr && pred->cls == VehicleClass::kCacc &&
                               pred->x - m.x <= ctrl.detection_range_m;
    const bool pred_same_link = pred != nullptr && pred->link == m.link;

    if (ctx.disconnected_links && m.crossed_link && m.tag.role == Role::kLeader)
      emit(LifecycleKind::kSplitBoundary, m, m.tag.platoon);

    if (m.tag.join) {
      const JoinAttempt attempt = *m.tag.join;
      const PlatoonState* target = reg.find(attempt.target);
      const bool target_ahead = target != nullptr && pred != nullptr && target->tail() == pred->id;
      if (!target_ahead) {
        emit(LifecycleKind::kJoinAbort, m, attempt.target);
        form(m);
        continue;
      }
      const double e = gap_error(m.x, m.v, pred->x, ctrl);
      if (std::abs(e) <= ctrl.join_threshold_m && (!ctx.disconnected_links || pred_same_link)) {
        if (at_cap(*target)) {
          emit(LifecycleKind::kSplitCap, m, attempt.target);
          form(m);
        } else {
          emit(LifecycleKind::kJoinCommit, m, attempt.target);
        }
      } else if (attempt.elapsed_s(ctx.dt) >= ctrl.join_window_s - window_eps) {
        emit(LifecycleKind::kJoinAbort, m, attempt.target);
        form(m);
      }
      continue;
    }

    if (m.tag.role == Role::kFollower) continue;
    const PlatoonState* own = reg.find(m.tag.platoon);
    if (m.tag.role == Role::kLeader && own != nullptr && own->size() > 1) continue;

    // Unattached, or leading a platoon of one: look for a platoon to join.
    const PlatoonState* ahead = pred_in_range ? reg.find(pred->tag.platoon) : nullptr;
    const bool joinable = ahead != nullptr && ahead->tail() == pred->id && ahead->id != m.tag.refused &&
                          (!ctx.disconnected_links || pred_same_link);
    if (joinable) {
      const PlatoonId target = ahead->id;
      if (at_cap(*ahead)) {
        emit(LifecycleKind::kSplitCap, m, target);
        if (m.tag.role == Role::kUnattached) form(m);
        continue;
      }
      emit(LifecycleKind::kJoinStart, m, target);
      if (std::abs(gap_error(m.x, m.v, pred->x, ctrl)) <= ctrl.join_threshold_m)
        emit(LifecycleKind::kJoinCommit, m, target);
      continue;
    }
    if (m.tag.role == Role::kLeader) continue;

    // Behind a CACC vehicle that is itself still settling: wait for it.
    const bool pred_settling = pred_in_range && pred->tag.role == Role::kUnattached;
    if (!pred_settling) form(m);
  }
  return events;
}

}  // namespace cacc
