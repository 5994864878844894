#pragma once

// Fixed-step corridor simulation. One Engine owns one world; a run is
// strictly single threaded. All randomness comes from the seeded
// mt19937_64 in WorldState through the portable helpers below, so a
// (config, seed) pair reproduces bit-for-bit on any conforming toolchain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "cacc/car_following.hpp"
#include "cacc/dynamics.hpp"
#include "cacc/metrics.hpp"
#include "cacc/platooning.hpp"
#include "cacc/scenario.hpp"

namespace cacc {

/// Thrown when the world breaks one of its own invariants. Always a bug in
/// the engine, never a property of the scenario.
class EngineInvariantError : public std::logic_error {
 public:
  explicit EngineInvariantError(const std::string& what) : std::logic_error(what) {}
};

struct VehicleState;

/// Externally scripted acceleration request, used by test harnesses to drive
/// a lead vehicle. The request still passes through the safety layer.
using Driver = std::function<double(const VehicleState&, double now)>;

struct VehicleState {
  VehicleId id = 0;
  VehicleClass cls = VehicleClass::kConventional;
  int lane = 0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  PlatoonTag tag;
  double entry_s = 0.0;
  int link = 0;
  bool crossed_link = false;
  Driver driver;
};

struct TrajectoryRow {
  double t = 0.0;
  VehicleId vehicle = 0;
  VehicleClass cls = VehicleClass::kConventional;
  int lane = 0;
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  PlatoonId platoon = kNoPlatoon;
  double fuel_rate_lps = 0.0;
  double delay_s = 0.0;
};

/// Per vehicle, per step diagnostics of the constraint resolution.
struct StepSample {
  double t = 0.0;  // end of step
  VehicleId vehicle = 0;
  int lane = 0;
  double v_before = 0.0;
  double v_after = 0.0;
  double a = 0.0;
  AccelEnvelope envelope;
  bool closing = false;     // faster than its leader at the start of the step
  bool infeasible = false;  // clamp_accel reported a_collision < a_min
  std::optional<double> spacing_after;  // front-to-front to the leader, end of step
  double jam_spacing_m = 0.0;
  double speed_ceiling = 0.0;  // join_boost * v_f of the link
};

struct Arrival {
  double t = 0.0;
  VehicleClass cls = VehicleClass::kConventional;
};

struct WorldState {
  std::int64_t steps = 0;
  double clock_s = 0.0;
  std::vector<std::vector<VehicleState>> lanes;  // each ordered front to rear
  PlatoonRegistry platoons;
  std::mt19937_64 rng;
  std::map<VehicleId, MetricsRecord> active;
  std::vector<MetricsRecord> completed;
  std::vector<LifecycleEvent> events;
  std::vector<std::deque<Arrival>> queues;
  std::vector<double> next_arrival_s;
  VehicleId next_vehicle_id = 1;
  std::uint64_t arrivals = 0;
  std::uint64_t spawned = 0;
  std::uint64_t safety_flags = 0;

  std::size_t vehicle_count() const {
    std::size_t n = 0;
    for (const auto& l : lanes) n += l.size();
    return n;
  }
};

struct RunResult {
  std::vector<TrajectoryRow> trajectories;  // only when requested
  std::vector<MetricsRecord> records;        // completed trips, in completion order
  std::vector<MetricsRecord> unfinished;     // still on the corridor at the end
  std::vector<LifecycleEvent> events;
  std::optional<FleetSummary> summary;  // empty when no trip completed
  std::uint64_t arrivals = 0;
  std::uint64_t spawned = 0;
  std::uint64_t safety_flags = 0;
};

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exponential(std::mt19937_64& rng, double rate) {
  if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log1p(-uniform01(rng)) / rate;
}

class Engine {
 public:
  explicit Engine(ScenarioConfig config) : cfg_(std::move(config)) {
    auto problems = config_problems(cfg_);
    if (!problems.empty())
      throw std::invalid_argument("invalid scenario: " + problems.front().field + ": " + problems.front().message);
    for (const auto& l : cfg_.links) {
      constants_.push_back(van_aerde_constants(l));
      boundaries_.push_back((boundaries_.empty() ? 0.0 : boundaries_.back()) + l.length_m);
    }
    world_.rng.seed(cfg_.seed);
    world_.lanes.resize(cfg_.lanes);
    world_.queues.resize(cfg_.lanes);
    const double rate = cfg_.demand_vphpl / 3600.0;
    for (int l = 0; l < cfg_.lanes; ++l) world_.next_arrival_s.push_back(exponential(world_.rng, rate));
  }

  const ScenarioConfig& config() const { return cfg_; }
  const WorldState& world() const { return world_; }
  double corridor_length_m() const { return boundaries_.back(); }

  void set_trajectory_sink(std::function<void(const TrajectoryRow&)> sink) { trajectory_sink_ = std::move(sink); }
  void set_step_observer(std::function<void(const StepSample&)> obs) { step_observer_ = std::move(obs); }
  void set_invariant_checks(bool on) { check_invariants_ = on; }

  int link_at(double x) const {
    auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), x);
    const auto idx = static_cast<int>(it - boundaries_.begin());
    return std::min(idx, static_cast<int>(boundaries_.size()) - 1);
  }

  /// Places a vehicle directly (tests, scripted scenarios). The lane must stay
  /// strictly ordered; throws std::invalid_argument otherwise.
  VehicleId insert_vehicle(int lane, double x, double v, VehicleClass cls, Driver driver = {}) {
    if (lane < 0 || lane >= cfg_.lanes) throw std::invalid_argument("insert_vehicle: bad lane");
    auto& vs = world_.lanes[lane];
    auto pos = std::find_if(vs.begin(), vs.end(), [x](const VehicleState& o) { return o.x < x; });
    if (pos != vs.end() && pos->x == x) throw std::invalid_argument("insert_vehicle: position occupied");
    if (pos != vs.begin() && std::prev(pos)->x == x) throw std::invalid_argument("insert_vehicle: position occupied");
    VehicleState s;
    s.id = world_.next_vehicle_id++;
    s.cls = cls;
    s.lane = lane;
    s.x = x;
    s.v = v;
    s.entry_s = world_.clock_s;
    s.link = link_at(x);
    s.driver = std::move(driver);
    MetricsRecord rec;
    rec.vehicle = s.id;
    rec.cls = cls;
    rec.entry_s = world_.clock_s;
    world_.active[s.id] = rec;
    ++world_.spawned;
    const VehicleId id = s.id;
    vs.insert(pos, std::move(s));
    return id;
  }

  /// Poisson arrivals up to the current clock, then at most one insertion per
  /// lane at the corridor entry.
  std::vector<VehicleId> spawn() {
    const double rate = cfg_.demand_vphpl / 3600.0;
    std::vector<int> platoon_lanes;
    for (int l = 0; l < cfg_.lanes; ++l)
      if (cfg_.is_platooning_lane(l)) platoon_lanes.push_back(l);

    for (int l = 0; l < cfg_.lanes; ++l) {
      while (world_.next_arrival_s[l] <= world_.clock_s) {
        Arrival arr{world_.next_arrival_s[l], VehicleClass::kConventional};
        if (uniform01(world_.rng) < cfg_.mpr) arr.cls = VehicleClass::kCacc;
        int target = l;
        if (arr.cls == VehicleClass::kCacc && !cfg_.is_platooning_lane(l) && !platoon_lanes.empty() &&
            uniform01(world_.rng) < cfg_.cacc_lane_preference) {
          const auto pick = static_cast<std::size_t>(uniform01(world_.rng) * static_cast<double>(platoon_lanes.size()));
          target = platoon_lanes[std::min(pick, platoon_lanes.size() - 1)];
        }
        world_.queues[target].push_back(arr);
        ++world_.arrivals;
        world_.next_arrival_s[l] += exponential(world_.rng, rate);
      }
    }

    std::vector<VehicleId> inserted;
    for (int l = 0; l < cfg_.lanes; ++l) {
      auto& q = world_.queues[l];
      if (q.empty()) continue;
      const auto entry_speed = safe_entry_speed(l);
      if (!entry_speed) continue;  // deferred
      const Arrival arr = q.front();
      q.pop_front();
      inserted.push_back(insert_vehicle(l, 0.0, *entry_speed, arr.cls));
    }
    return inserted;
  }

  void step() {
    const double dt = cfg_.dt_s;
    spawn();
    const double t_end = static_cast<double>(world_.steps + 1) * dt;

    // Resolve every vehicle against the start-of-step snapshot.
    std::vector<std::vector<VehicleState>> next = world_.lanes;
    std::vector<std::vector<Resolved>> resolved(world_.lanes.size());
    for (std::size_t l = 0; l < world_.lanes.size(); ++l) {
      const auto& lane = world_.lanes[l];
      for (std::size_t i = 0; i < lane.size(); ++i) {
        const VehicleState* pred = i > 0 ? &lane[i - 1] : nullptr;
        Resolved r = resolve(lane[i], pred, static_cast<int>(l));
        VehicleState& n = next[l][i];
        n.v = r.v_next;
        n.a = r.a;
        n.x = lane[i].x + 0.5 * (lane[i].v + r.v_next) * dt;
        const int link = link_at(n.x);
        n.crossed_link = link != lane[i].link && n.x < corridor_length_m();
        n.link = link;
        resolved[l].push_back(r);
      }
    }
    world_.lanes = std::move(next);
    world_.steps += 1;
    world_.clock_s = t_end;

    for (std::size_t l = 0; l < world_.lanes.size(); ++l) {
      const auto& lane = world_.lanes[l];
      for (std::size_t i = 0; i < lane.size(); ++i) {
        const VehicleState& s = lane[i];
        Resolved& r = resolved[l][i];
        account(s, r);
        if (step_observer_) {
          StepSample smp;
          smp.t = t_end;
          smp.vehicle = s.id;
          smp.lane = s.lane;
          smp.v_before = r.v_before;
          smp.v_after = s.v;
          smp.a = s.a;
          smp.envelope = r.env;
          smp.closing = r.closing;
          smp.infeasible = r.infeasible;
          if (i > 0) smp.spacing_after = lane[i - 1].x - s.x;
          smp.jam_spacing_m = cfg_.links[r.link].jam_spacing_m();
          smp.speed_ceiling = cfg_.controller.join_boost * cfg_.links[r.link].free_flow_mps();
          step_observer_(smp);
        }
      }
    }

    for (std::size_t l = 0; l < world_.lanes.size(); ++l) {
      retire(static_cast<int>(l));
      for (auto& s : world_.lanes[l])
        if (s.tag.join) ++s.tag.join->elapsed_steps;
      if (cfg_.preset != Preset::kNone && cfg_.is_platooning_lane(static_cast<int>(l)))
        scan_lane(static_cast<int>(l));
    }
    if (check_invariants_) verify();
  }

  /// Runs until the configured duration (or `max_steps`) and collects results.
  RunResult run(bool keep_trajectories = false) {
    RunResult out;
    if (keep_trajectories) {
      auto user_sink = trajectory_sink_;
      trajectory_sink_ = [&out, user_sink](const TrajectoryRow& row) {
        out.trajectories.push_back(row);
        if (user_sink) user_sink(row);
      };
    }
    const auto total = static_cast<std::int64_t>(std::llround(cfg_.duration_s / cfg_.dt_s));
    while (world_.steps < total) step();
    return finish(std::move(out));
  }

  RunResult finish(RunResult out = {}) const {
    out.records = world_.completed;
    for (const auto& [id, rec] : world_.active) out.unfinished.push_back(rec);
    out.events = world_.events;
    out.arrivals = world_.arrivals;
    out.spawned = world_.spawned;
    out.safety_flags = world_.safety_flags;
    try {
      out.summary = aggregate(out.records);
    } catch (const EmptyFleetError&) {
      out.summary.reset();
    }
    return out;
  }

  const VehicleState* find(VehicleId id) const {
    for (const auto& lane : world_.lanes)
      for (const auto& s : lane)
        if (s.id == id) return &s;
    return nullptr;
  }

 private:
  struct Resolved {
    double v_before = 0.0;
    double v_next = 0.0;
    double a = 0.0;
    AccelEnvelope env;
    bool closing = false;
    bool infeasible = false;
    int link = 0;
    double grade = 0.0;
    double fuel_rate = 0.0;
  };

  bool cooperative(const VehicleState& me, const VehicleState* pred, int lane) const {
    return cfg_.preset != Preset::kNone && me.cls == VehicleClass::kCacc && cfg_.is_platooning_lane(lane) &&
           pred != nullptr && pred->cls == VehicleClass::kCacc &&
           pred->x - me.x <= cfg_.controller.detection_range_m;
  }

  Resolved resolve(const VehicleState& me, const VehicleState* pred, int lane) const {
    const double dt = cfg_.dt_s;
    const auto& ctrl = cfg_.controller;
    const auto& p = cfg_.vehicle;
    const int link = link_at(me.x);
    const LinkFundamental& f = cfg_.links[link];
    const GradeContext grade{f.grade};
    const double v_limit = f.free_flow_mps();
    const bool coop = cooperative(me, pred, lane);
    const bool follower = me.tag.role == Role::kFollower && pred != nullptr;
    const bool joining = me.tag.join.has_value();

    Resolved r;
    r.v_before = me.v;
    r.link = link;
    r.grade = f.grade;

    double b_kin = 0.0;
    if (pred != nullptr) {
      const double delta = me.v * me.v - pred->v * pred->v;
      r.closing = delta > 0.0;
      const double gap = pred->x - me.x - f.jam_spacing_m();
      if (r.closing) b_kin = gap > 0.0 ? kinematic_decel(me.x, me.v, pred->x, pred->v, f.jam_spacing_m()) : 1e9;
    }
    r.env = accel_envelope(p, me.v, grade, b_kin);

    double candidate = 0.0;
    if (me.driver) {
      candidate = me.driver(me, world_.clock_s);
    } else if (follower) {
      candidate = cacc_accel(me.x, me.v, pred->x, pred->v, ctrl);
    } else {
      candidate = (join_target_speed(v_limit, joining, ctrl) - me.v) / dt;
      if (coop) candidate = std::min(candidate, cacc_accel(me.x, me.v, pred->x, pred->v, ctrl));
    }

    std::optional<LeadState> lead;
    if (pred != nullptr) lead = LeadState{pred->x, pred->v, pred->a};
    const double v_rpa = rpa_speed(me.v, lead, me.x, f, constants_[link], r.env.a_max, p.desired_decel, dt,
                                   RpaOptions{.steady_state_branch = !coop});
    const double ceiling = (coop || joining) ? ctrl.join_boost * v_limit : v_limit;
    double v_next = std::min({me.v + candidate * dt, v_rpa, me.driver ? v_rpa : ceiling});
    v_next = std::max(v_next, 0.0);

    const ClampResult c = clamp_accel((v_next - me.v) / dt, r.env);
    r.infeasible = c.infeasible;
    r.a = c.accel;
    r.v_next = me.v + r.a * dt;
    if (r.v_next < 0.0) {
      r.v_next = 0.0;
      r.a = -me.v / dt;
    }
    return r;
  }

  std::optional<double> safe_entry_speed(int lane) const {
    const LinkFundamental& f = cfg_.links.front();
    const double v_free = f.free_flow_mps();
    const auto& vs = world_.lanes[lane];
    if (vs.empty()) return v_free;
    const VehicleState& last = vs.back();
    const double spacing = last.x;
    if (!(spacing > f.jam_spacing_m() * (1.0 + 1e-6))) return std::nullopt;
    const double steady = kmh_to_mps(van_aerde_speed(constants_.front(), f.free_flow_kmh, m_to_km(spacing)));
    const double collision_free =
        std::sqrt(last.v * last.v + 2.0 * cfg_.vehicle.desired_decel * (spacing - f.jam_spacing_m()));
    return std::max(0.0, std::min({v_free, steady, collision_free}));
  }

  void account(const VehicleState& s, Resolved& r) {
    const double dt = cfg_.dt_s;
    MetricsRecord& rec = world_.active.at(s.id);
    const bool in_platoon = platoon_size(s.tag.platoon) >= 2;
    const double drag = s.tag.role == Role::kFollower ? cfg_.follower_drag_factor : 1.0;
    const double force = effective_force(cfg_.vehicle, s.v, s.a, GradeContext{r.grade}, drag);
    r.fuel_rate = fuel_rate(cfg_.vehicle, instantaneous_power(force, s.v), s.v, cfg_.clamp_negative_power);
    rec.fuel_l += r.fuel_rate * dt;
    rec.delay_s += delay_increment(s.v, cfg_.links[r.link].free_flow_mps(), dt);
    rec.distance_m += 0.5 * (r.v_before + s.v) * dt;
    if (in_platoon) rec.platoon_time_s += dt;
    if (r.infeasible) ++world_.safety_flags;
    if (trajectory_sink_) {
      TrajectoryRow row{world_.clock_s, s.id, s.cls, s.lane, s.x, s.v, s.a, s.tag.platoon, r.fuel_rate, rec.delay_s};
      trajectory_sink_(row);
    }
  }

  std::size_t platoon_size(PlatoonId id) const {
    const PlatoonState* p = world_.platoons.find(id);
    return p == nullptr ? 0 : p->size();
  }

  PlatoonTag& tag_of(VehicleId id) {
    for (auto& lane : world_.lanes)
      for (auto& s : lane)
        if (s.id == id) return s.tag;
    throw EngineInvariantError("unknown vehicle " + std::to_string(id));
  }

  void record_event(const LifecycleEvent& ev) {
    apply_event(ev, world_.platoons, [this](VehicleId id) -> PlatoonTag& { return tag_of(id); });
    world_.events.push_back(ev);
  }

  void retire(int lane) {
    auto& vs = world_.lanes[lane];
    const double end = corridor_length_m();
    while (!vs.empty() && vs.front().x >= end) {
      const VehicleState& s = vs.front();
      if (s.tag.join) record_event({world_.clock_s, LifecycleKind::kJoinAbort, s.id, s.tag.join->target, lane, s.x});
      if (s.tag.platoon != kNoPlatoon)
        record_event({world_.clock_s, LifecycleKind::kSplitExit, s.id, s.tag.platoon, lane, s.x});
      MetricsRecord rec = world_.active.at(s.id);
      rec.travel_time_s = world_.clock_s - rec.entry_s;
      rec.completed = true;
      world_.active.erase(s.id);
      world_.completed.push_back(rec);
      vs.erase(vs.begin());
    }
  }

  void scan_lane(int lane) {
    const auto& vs = world_.lanes[lane];
    std::vector<LaneMember> snapshot;
    snapshot.reserve(vs.size());
    for (const auto& s : vs) snapshot.push_back({s.id, s.cls, s.x, s.v, s.link, s.crossed_link, s.tag});
    ScanContext ctx{world_.clock_s, cfg_.dt_s, lane, cfg_.disconnected_links()};
    for (const auto& ev : platoon_scan(std::move(snapshot), world_.platoons, cfg_.controller, ctx)) record_event(ev);
  }

  void verify() const {
    std::map<VehicleId, std::pair<int, std::size_t>> where;
    for (std::size_t l = 0; l < world_.lanes.size(); ++l) {
      const auto& vs = world_.lanes[l];
      for (std::size_t i = 0; i < vs.size(); ++i) {
        if (!(vs[i].v >= 0.0)) throw EngineInvariantError("negative speed for vehicle " + std::to_string(vs[i].id));
        if (i > 0 && !(vs[i - 1].x > vs[i].x))
          throw EngineInvariantError("lane ordering broken at vehicle " + std::to_string(vs[i].id));
        where[vs[i].id] = {static_cast<int>(l), i};
      }
    }
    std::map<VehicleId, PlatoonId> owner;
    for (const auto& [id, p] : world_.platoons.platoons) {
      if (p.members.empty()) throw EngineInvariantError("empty platoon " + std::to_string(id));
      if (cfg_.controller.max_platoon_size && static_cast<int>(p.size()) > *cfg_.controller.max_platoon_size)
        throw EngineInvariantError("platoon " + std::to_string(id) + " exceeds the size cap");
      for (std::size_t k = 0; k < p.members.size(); ++k) {
        const VehicleId m = p.members[k];
        auto it = where.find(m);
        if (it == where.end()) throw EngineInvariantError("platoon member not on corridor");
        if (!owner.emplace(m, id).second) throw EngineInvariantError("vehicle in two platoons");
        const VehicleState& s = world_.lanes[it->second.first][it->second.second];
        if (s.cls != VehicleClass::kCacc || it->second.first != p.lane)
          throw EngineInvariantError("platoon member of wrong class or lane");
        if (s.tag.platoon != id || s.tag.role != (k == 0 ? Role::kLeader : Role::kFollower))
          throw EngineInvariantError("platoon tag mismatch for vehicle " + std::to_string(m));
        if (k > 0 && it->second.second != where.at(p.members[k - 1]).second + 1)
          throw EngineInvariantError("platoon " + std::to_string(id) + " is not contiguous");
        if (cfg_.disconnected_links() && s.link != world_.lanes[p.lane][where.at(p.leader()).second].link)
          throw EngineInvariantError("platoon " + std::to_string(id) + " spans a link boundary");
      }
    }
    for (const auto& lane : world_.lanes)
      for (const auto& s : lane) {
        if (s.tag.platoon != kNoPlatoon && !owner.count(s.id))
          throw EngineInvariantError("dangling platoon tag on vehicle " + std::to_string(s.id));
        if (s.tag.join && s.tag.join->elapsed_s(cfg_.dt_s) > cfg_.controller.join_window_s + 1e-9)
          throw EngineInvariantError("join attempt outlived its window");
      }
  }

  ScenarioConfig cfg_;
  std::vector<VanAerdeConstants> constants_;
  std::vector<double> boundaries_;  // cumulative link end positions
  WorldState world_;
  std::function<void(const TrajectoryRow&)> trajectory_sink_;
  std::function<void(const StepSample&)> step_observer_;
  bool check_invariants_ = true;
};

/// Convenience wrapper: validates, runs to completion, returns results.
inline RunResult run(const ScenarioConfig& config, bool keep_trajectories = false) {
  Engine engine(config);
  return engine.run(keep_trajectories);
}

}  // namespace cacc
