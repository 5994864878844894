#pragma once

// Scenario files, run outputs and MPR sweeps.
//
// Scenario documents are YAML with five sections (corridor, vehicle,
// controller, demand, sim) plus an optional metrics section. Every field is
// optional except the link list; serialize_scenario() writes every effective
// value back out so run directories are self-describing.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include "json.hpp"

#include "cacc/engine.hpp"
#include "cacc/metrics.hpp"
#include "cacc/scenario.hpp"

namespace cacc {

struct Diagnostic {
  int line = 0;  // 1-based, 0 when unknown
  std::string field;
  std::string message;
};

class ScenarioError : public std::runtime_error {
 public:
  explicit ScenarioError(std::vector<Diagnostic> diags)
      : std::runtime_error(render(diags)), diagnostics_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string render(const std::vector<Diagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      if (d.line > 0) out += fmt::format("line {}: ", d.line);
      out += d.field + ": " + d.message;
    }
    return out;
  }

  std::vector<Diagnostic> diagnostics_;
};

class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

class ScenarioReader {
 public:
  std::vector<Diagnostic> diags;
  std::map<std::string, int> lines;  // field path -> line

  void error(const YAML::Node& n, const std::string& field, const std::string& msg) {
    diags.push_back({line_of(n), field, msg});
  }

  static int line_of(const YAML::Node& n) {
    const auto mark = n.Mark();
    return mark.line >= 0 ? mark.line + 1 : 0;
  }

  /// Reads the mapping `node` and rejects keys outside `known`.
  bool check_map(const YAML::Node& node, const std::string& path, const std::set<std::string>& known) {
    if (!node.IsMap()) {
      error(node, path, "expected a mapping");
      return false;
    }
    lines[path] = line_of(node);
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!known.count(key)) error(kv.first, path + "." + key, "unknown field");
    }
    return true;
  }

  template <class T>
  void read(const YAML::Node& parent, const std::string& path, const char* key, T& out) {
    const YAML::Node n = parent[key];
    if (!n) return;
    const std::string field = path + "." + key;
    lines[field] = line_of(n);
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      error(n, field, std::is_same_v<T, bool> ? "expected true or false" : "expected a number");
    }
  }
};

inline const std::set<std::string> kLinkKeys{"length_m", "grade", "free_flow_kmh", "capacity_speed_kmh",
                                             "saturation_flow_vphpl", "jam_density_vpkmpl", "count"};
inline const std::set<std::string> kVehicleKeys{
    "mass_kg",         "tractive_axle_mass_kg", "power_kw",         "driveline_efficiency", "adhesion",
    "air_density",     "drag_coefficient",      "altitude_factor",  "frontal_area_m2",      "rolling_c0",
    "rolling_c1",      "rolling_c2",            "braking_efficiency", "desired_decel_mps2", "gravity_mps2",
    "fuel_alpha0",     "fuel_alpha1",           "fuel_alpha2",      "fuel_alpha3"};
inline const std::set<std::string> kControllerKeys{
    "preset",          "time_gap_s",       "gain_per_s",        "jam_spacing_m",    "join_boost",
    "join_window_s",   "max_platoon_size", "join_threshold_m",  "detection_range_m", "paper_literal_sign"};

}  // namespace detail

inline ScenarioConfig parse_scenario(const std::string& text) {
  detail::ScenarioReader rd;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError({{e.mark.line + 1, "<document>", e.msg}});
  }
  if (!root || root.IsNull()) throw ScenarioError({{0, "<document>", "empty scenario"}});
  if (!rd.check_map(root, "<document>", {"corridor", "vehicle", "controller", "demand", "sim", "metrics"}))
    throw ScenarioError(rd.diags);

  ScenarioConfig c;
  c.links.clear();

  if (const auto corridor = root["corridor"]; !corridor) {
    rd.error(root, "corridor", "section is required");
  } else if (rd.check_map(corridor, "corridor", {"lanes", "links"})) {
    rd.read(corridor, "corridor", "lanes", c.lanes);
    const auto links = corridor["links"];
    if (!links || !links.IsSequence() || links.size() == 0) {
      rd.error(links ? links : corridor, "corridor.links", "a non-empty list of links is required");
    } else {
      for (std::size_t i = 0; i < links.size(); ++i) {
        const std::string path = fmt::format("corridor.links[{}]", i);
        if (!rd.check_map(links[i], path, detail::kLinkKeys)) continue;
        LinkFundamental f;
        int count = 1;
        rd.read(links[i], path, "length_m", f.length_m);
        rd.read(links[i], path, "grade", f.grade);
        rd.read(links[i], path, "free_flow_kmh", f.free_flow_kmh);
        rd.read(links[i], path, "capacity_speed_kmh", f.capacity_speed_kmh);
        rd.read(links[i], path, "saturation_flow_vphpl", f.saturation_flow_vphpl);
        rd.read(links[i], path, "jam_density_vpkmpl", f.jam_density_vpkmpl);
        rd.read(links[i], path, "count", count);
        if (count < 1) rd.error(links[i]["count"], path + ".count", "must be >= 1");
        for (int k = 0; k < std::max(count, 1); ++k) {
          rd.lines[fmt::format("corridor.links[{}]", c.links.size())] = rd.lines[path];
          c.links.push_back(f);
        }
      }
    }
  }

  if (const auto v = root["vehicle"]; v && rd.check_map(v, "vehicle", detail::kVehicleKeys)) {
    auto& p = c.vehicle;
    rd.read(v, "vehicle", "mass_kg", p.mass_kg);
    rd.read(v, "vehicle", "tractive_axle_mass_kg", p.tractive_axle_mass_kg);
    rd.read(v, "vehicle", "power_kw", p.power_kw);
    rd.read(v, "vehicle", "driveline_efficiency", p.driveline_efficiency);
    rd.read(v, "vehicle", "adhesion", p.adhesion);
    rd.read(v, "vehicle", "air_density", p.air_density);
    rd.read(v, "vehicle", "drag_coefficient", p.drag_coefficient);
    rd.read(v, "vehicle", "altitude_factor", p.altitude_factor);
    rd.read(v, "vehicle", "frontal_area_m2", p.frontal_area_m2);
    rd.read(v, "vehicle", "rolling_c0", p.rolling_c0);
    rd.read(v, "vehicle", "rolling_c1", p.rolling_c1);
    rd.read(v, "vehicle", "rolling_c2", p.rolling_c2);
    rd.read(v, "vehicle", "braking_efficiency", p.braking_efficiency);
    rd.read(v, "vehicle", "desired_decel_mps2", p.desired_decel);
    rd.read(v, "vehicle", "gravity_mps2", p.gravity);
    rd.read(v, "vehicle", "fuel_alpha0", p.fuel_alpha0);
    rd.read(v, "vehicle", "fuel_alpha1", p.fuel_alpha1);
    rd.read(v, "vehicle", "fuel_alpha2", p.fuel_alpha2);
    rd.read(v, "vehicle", "fuel_alpha3", p.fuel_alpha3);
  }

  // Jam spacing defaults to 1/k_j of the entry link unless given explicitly.
  if (!c.links.empty()) c.controller.jam_spacing_m = c.links.front().jam_spacing_m();
  apply_preset_defaults(c);
  if (const auto k = root["controller"]; k && rd.check_map(k, "controller", detail::kControllerKeys)) {
    auto& ctrl = c.controller;
    if (const auto preset = k["preset"]) {
      rd.lines["controller.preset"] = detail::ScenarioReader::line_of(preset);
      const auto parsed = preset_from_string(preset.as<std::string>());
      if (parsed) {
        c.preset = *parsed;
        apply_preset_defaults(c);
      } else {
        rd.error(preset, "controller.preset", "must be one of none, A, B, C, D, E");
      }
    }
    rd.read(k, "controller", "time_gap_s", ctrl.time_gap_s);
    rd.read(k, "controller", "gain_per_s", ctrl.gain_per_s);
    rd.read(k, "controller", "jam_spacing_m", ctrl.jam_spacing_m);
    rd.read(k, "controller", "join_boost", ctrl.join_boost);
    rd.read(k, "controller", "join_window_s", ctrl.join_window_s);
    rd.read(k, "controller", "join_threshold_m", ctrl.join_threshold_m);
    rd.read(k, "controller", "detection_range_m", ctrl.detection_range_m);
    rd.read(k, "controller", "paper_literal_sign", ctrl.paper_literal_sign);
    if (k["max_platoon_size"]) {
      int cap = 0;
      rd.read(k, "controller", "max_platoon_size", cap);
      ctrl.max_platoon_size = cap == 0 ? std::nullopt : std::optional<int>(cap);
    }
  }

  if (const auto d = root["demand"]; d && rd.check_map(d, "demand", {"flow_vphpl", "mpr", "cacc_lane_preference"})) {
    rd.read(d, "demand", "flow_vphpl", c.demand_vphpl);
    rd.read(d, "demand", "mpr", c.mpr);
    rd.read(d, "demand", "cacc_lane_preference", c.cacc_lane_preference);
  }
  if (const auto m = root["metrics"]; m && rd.check_map(m, "metrics", {"follower_drag_factor", "clamp_negative_power"})) {
    rd.read(m, "metrics", "follower_drag_factor", c.follower_drag_factor);
    rd.read(m, "metrics", "clamp_negative_power", c.clamp_negative_power);
  }
  if (const auto s = root["sim"]; s && rd.check_map(s, "sim", {"duration_s", "dt_s", "seed"})) {
    rd.read(s, "sim", "duration_s", c.duration_s);
    rd.read(s, "sim", "dt_s", c.dt_s);
    rd.read(s, "sim", "seed", c.seed);
  }

  if (rd.diags.empty()) {
    for (const auto& p : config_problems(c)) {
      // Attribute the problem to the closest field we saw a line for.
      int line = 0;
      for (std::string f = p.field; !f.empty(); f = f.substr(0, f.find_last_of(".[") == std::string::npos ? 0 : f.find_last_of(".["))) {
        if (auto it = rd.lines.find(f); it != rd.lines.end()) {
          line = it->second;
          break;
        }
        if (f.find_last_of(".[") == std::string::npos) break;
      }
      rd.diags.push_back({line, p.field, p.message});
    }
  }
  if (!rd.diags.empty()) throw ScenarioError(rd.diags);
  return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError({{0, "<file>", "cannot open " + path.string()}});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

/// Canonical text form with every effective value spelled out.
inline std::string serialize_scenario(const ScenarioConfig& c) {
  std::string out;
  auto line = [&out](std::string_view s) {
    out += s;
    out += '\n';
  };
  auto num = [](double v) { return fmt::format("{}", v); };
  line("corridor:");
  line(fmt::format("  lanes: {}", c.lanes));
  line("  links:");
  for (const auto& l : c.links) {
    line(fmt::format("    - length_m: {}", num(l.length_m)));
    line(fmt::format("      grade: {}", num(l.grade)));
    line(fmt::format("      free_flow_kmh: {}", num(l.free_flow_kmh)));
    line(fmt::format("      capacity_speed_kmh: {}", num(l.capacity_speed_kmh)));
    line(fmt::format("      saturation_flow_vphpl: {}", num(l.saturation_flow_vphpl)));
    line(fmt::format("      jam_density_vpkmpl: {}", num(l.jam_density_vpkmpl)));
  }
  const auto& p = c.vehicle;
  line("vehicle:");
  line(fmt::format("  mass_kg: {}", num(p.mass_kg)));
  line(fmt::format("  tractive_axle_mass_kg: {}", num(p.tractive_axle_mass_kg)));
  line(fmt::format("  power_kw: {}", num(p.power_kw)));
  line(fmt::format("  driveline_efficiency: {}", num(p.driveline_efficiency)));
  line(fmt::format("  adhesion: {}", num(p.adhesion)));
  line(fmt::format("  air_density: {}", num(p.air_density)));
  line(fmt::format("  drag_coefficient: {}", num(p.drag_coefficient)));
  line(fmt::format("  altitude_factor: {}", num(p.altitude_factor)));
  line(fmt::format("  frontal_area_m2: {}", num(p.frontal_area_m2)));
  line(fmt::format("  rolling_c0: {}", num(p.rolling_c0)));
  line(fmt::format("  rolling_c1: {}", num(p.rolling_c1)));
  line(fmt::format("  rolling_c2: {}", num(p.rolling_c2)));
  line(fmt::format("  braking_efficiency: {}", num(p.braking_efficiency)));
  line(fmt::format("  desired_decel_mps2: {}", num(p.desired_decel)));
  line(fmt::format("  gravity_mps2: {}", num(p.gravity)));
  line(fmt::format("  fuel_alpha0: {}", num(p.fuel_alpha0)));
  line(fmt::format("  fuel_alpha1: {}", num(p.fuel_alpha1)));
  line(fmt::format("  fuel_alpha2: {}", num(p.fuel_alpha2)));
  line(fmt::format("  fuel_alpha3: {}", num(p.fuel_alpha3)));
  const auto& k = c.controller;
  line("controller:");
  line(fmt::format("  preset: {}", to_string(c.preset)));
  line(fmt::format("  time_gap_s: {}", num(k.time_gap_s)));
  line(fmt::format("  gain_per_s: {}", num(k.gain_per_s)));
  line(fmt::format("  jam_spacing_m: {}", num(k.jam_spacing_m)));
  line(fmt::format("  join_boost: {}", num(k.join_boost)));
  line(fmt::format("  join_window_s: {}", num(k.join_window_s)));
  line(fmt::format("  max_platoon_size: {}", k.max_platoon_size.value_or(0)));
  line(fmt::format("  join_threshold_m: {}", num(k.join_threshold_m)));
  line(fmt::format("  detection_range_m: {}", num(k.detection_range_m)));
  line(fmt::format("  paper_literal_sign: {}", k.paper_literal_sign));
  line("demand:");
  line(fmt::format("  flow_vphpl: {}", num(c.demand_vphpl)));
  line(fmt::format("  mpr: {}", num(c.mpr)));
  line(fmt::format("  cacc_lane_preference: {}", num(c.cacc_lane_preference)));
  line("metrics:");
  line(fmt::format("  follower_drag_factor: {}", num(c.follower_drag_factor)));
  line(fmt::format("  clamp_negative_power: {}", c.clamp_negative_power));
  line("sim:");
  line(fmt::format("  duration_s: {}", num(c.duration_s)));
  line(fmt::format("  dt_s: {}", num(c.dt_s)));
  line(fmt::format("  seed: {}", c.seed));
  return out;
}

// --- run outputs -----------------------------------------------------------

inline constexpr std::string_view kTrajectoryHeader =
    "t,vehicle_id,class,lane,x_m,v_mps,a_mps2,platoon_id,fuel_rate_lps,delay_s";
inline constexpr std::string_view kEventHeader = "t,event,vehicle_id,platoon_id,lane,x_m";

/// Platoon ids as written to CSV; -1 means no platoon.
inline std::int64_t csv_platoon(PlatoonId id) { return id == kNoPlatoon ? -1 : static_cast<std::int64_t>(id); }

inline std::string format_row(const TrajectoryRow& r) {
  return fmt::format("{:.6f},{},{},{},{:.6f},{:.6f},{:.6f},{},{:.6f},{:.6f}", r.t, r.vehicle, static_cast<int>(r.cls),
                     r.lane, r.x, r.v, r.a, csv_platoon(r.platoon), r.fuel_rate_lps, r.delay_s);
}

inline std::string format_event(const LifecycleEvent& e) {
  return fmt::format("{:.6f},{},{},{},{},{:.6f}", e.t, to_string(e.kind), e.vehicle, csv_platoon(e.platoon), e.lane, e.x);
}

/// Streams trajectory rows to `trajectories.csv` as the engine produces them.
class TrajectoryCsvWriter {
 public:
  explicit TrajectoryCsvWriter(const std::filesystem::path& path) : path_(path), out_(path) {
    if (!out_) throw OutputError("cannot write " + path.string());
    out_ << kTrajectoryHeader << '\n';
  }

  void write(const TrajectoryRow& row) { out_ << format_row(row) << '\n'; }

  void close() {
    out_.close();
    if (out_.fail()) throw OutputError("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

inline nlohmann::ordered_json means_json(const ClassMeans& m) {
  if (m.trips == 0) return {{"trips", 0}, {"travel_time_s", nullptr}, {"delay_s", nullptr}, {"fuel_l", nullptr}};
  return {{"trips", m.trips}, {"travel_time_s", m.travel_time_s}, {"delay_s", m.delay_s}, {"fuel_l", m.fuel_l}};
}

inline nlohmann::ordered_json summary_json(const RunResult& r, const ScenarioConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["mpr"] = c.mpr;
  j["preset"] = std::string(to_string(c.preset));
  j["duration_s"] = c.duration_s;
  j["arrivals"] = r.arrivals;
  j["spawned"] = r.spawned;
  j["completed_trips"] = r.records.size();
  j["unfinished"] = r.unfinished.size();
  j["safety_flags"] = r.safety_flags;
  const FleetSummary s = r.summary.value_or(FleetSummary{});
  j["fleet"] = means_json(s.fleet);
  j["cacc"] = means_json(s.cacc);
  j["conventional"] = means_json(s.conventional);
  nlohmann::ordered_json counts;
  for (auto kind : {LifecycleKind::kForm, LifecycleKind::kJoinStart, LifecycleKind::kJoinCommit,
                    LifecycleKind::kJoinAbort, LifecycleKind::kSplitCap, LifecycleKind::kSplitBoundary,
                    LifecycleKind::kSplitExit})
    counts[std::string(to_string(kind))] =
        std::count_if(r.events.begin(), r.events.end(), [kind](const LifecycleEvent& e) { return e.kind == kind; });
  j["events"] = counts;
  j["config"] = serialize_scenario(c);
  return j;
}

struct WriteOptions {
  bool trajectories = true;  // write trajectories.csv from RunResult::trajectories
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw OutputError("cannot write " + path.string());
  out << text;
  out.close();
  if (out.fail()) throw OutputError("write failed for " + path.string());
}

/// Writes summary.json, events.csv, scenario.yaml and, when asked,
/// trajectories.csv into `dir` (created if needed).
inline void write_outputs(const RunResult& r, const ScenarioConfig& c, const std::filesystem::path& dir,
                          WriteOptions opt = {}) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw OutputError("cannot create " + dir.string() + ": " + ec.message());

  if (opt.trajectories) {
    TrajectoryCsvWriter w(dir / "trajectories.csv");
    for (const auto& row : r.trajectories) w.write(row);
    w.close();
  }
  std::string events(kEventHeader);
  events += '\n';
  for (const auto& e : r.events) {
    events += format_event(e);
    events += '\n';
  }
  write_text(dir / "events.csv", events);
  write_text(dir / "summary.json", summary_json(r, c).dump(2) + "\n");
  write_text(dir / "scenario.yaml", serialize_scenario(c));
}

// --- sweeps ----------------------------------------------------------------

struct SweepSpec {
  ScenarioConfig base;
  std::vector<double> mpr_pct{0, 1, 5, 10, 15, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  int seeds = 6;
  std::uint64_t first_seed = 1;
  std::filesystem::path out_dir;  // empty: nothing written
  unsigned jobs = 0;              // 0: hardware concurrency
  bool per_run_outputs = true;
  // Called on each engine before it runs, possibly from several threads at once.
  std::function<void(Engine&, double mpr_pct, std::uint64_t seed)> prepare;
};

struct SweepRow {
  double mpr_pct = 0.0;
  int runs = 0;
  ClassMeans mean;  // seed-averaged fleet means
  FleetChange change;
};

class SweepError : public std::runtime_error {
 public:
  SweepError(double mpr_pct, std::uint64_t seed, const std::string& why)
      : std::runtime_error(fmt::format("run mpr={}% seed={} failed: {}", mpr_pct, seed, why)),
        mpr_pct_(mpr_pct),
        seed_(seed) {}
  double mpr_pct() const { return mpr_pct_; }
  std::uint64_t seed() const { return seed_; }

 private:
  double mpr_pct_;
  std::uint64_t seed_;
};

inline std::vector<std::string> sweep_problems(const SweepSpec& s) {
  std::vector<std::string> out;
  if (s.mpr_pct.empty()) out.push_back("MPR list is empty");
  for (double m : s.mpr_pct)
    if (!(m >= 0.0 && m <= 100.0)) out.push_back(fmt::format("MPR {} outside [0, 100]", m));
  if (s.seeds < 1) out.push_back("seed count must be >= 1");
  return out;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "mpr_pct,runs,travel_time_s,delay_s,fuel_l,travel_time_change_pct,delay_change_pct,fuel_change_pct\n";
  for (const auto& r : rows)
    out += fmt::format("{:.2f},{},{:.6f},{:.6f},{:.6f},{:.2f},{:.2f},{:.2f}\n", r.mpr_pct, r.runs, r.mean.travel_time_s,
                       r.mean.delay_s, r.mean.fuel_l, r.change.travel_time_pct, r.change.delay_pct, r.change.fuel_pct);
  return out;
}

/// Runs every (MPR, seed) pair, in parallel when jobs > 1, and reports
/// seed-averaged fleet means per MPR in ascending MPR order. MPR 0 is always
/// included as the baseline for the change columns.
inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  if (auto problems = sweep_problems(spec); !problems.empty()) throw std::invalid_argument(problems.front());
  std::vector<double> mprs = spec.mpr_pct;
  mprs.push_back(0.0);
  std::sort(mprs.begin(), mprs.end());
  mprs.erase(std::unique(mprs.begin(), mprs.end()), mprs.end());

  struct Job {
    double mpr_pct;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double m : mprs)
    for (int s = 0; s < spec.seeds; ++s) jobs.push_back({m, spec.first_seed + static_cast<std::uint64_t>(s)});

  std::vector<ClassMeans> results(jobs.size());
  std::vector<std::string> failures(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      ScenarioConfig cfg = spec.base;
      cfg.mpr = jobs[i].mpr_pct / 100.0;
      cfg.seed = jobs[i].seed;
      try {
        Engine engine(cfg);
        if (spec.prepare) spec.prepare(engine, jobs[i].mpr_pct, jobs[i].seed);
        RunResult r = engine.run();
        if (!r.summary) throw std::runtime_error("no completed trips");
        results[i] = r.summary->fleet;
        if (!spec.out_dir.empty() && spec.per_run_outputs)
          write_outputs(r, cfg, spec.out_dir / fmt::format("mpr_{:06.2f}", jobs[i].mpr_pct) /
                                    fmt::format("seed_{}", jobs[i].seed),
                        WriteOptions{.trajectories = false});
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    }
  };
  unsigned n_threads = spec.jobs != 0 ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  for (std::size_t i = 0; i < jobs.size(); ++i)
    if (!failures[i].empty()) throw SweepError(jobs[i].mpr_pct, jobs[i].seed, failures[i]);

  std::vector<SweepRow> rows;
  for (std::size_t m = 0; m < mprs.size(); ++m) {
    SweepRow row;
    row.mpr_pct = mprs[m];
    row.runs = spec.seeds;
    for (int s = 0; s < spec.seeds; ++s) {
      const ClassMeans& r = results[m * static_cast<std::size_t>(spec.seeds) + static_cast<std::size_t>(s)];
      row.mean.trips += r.trips;
      row.mean.travel_time_s += r.travel_time_s / spec.seeds;
      row.mean.delay_s += r.delay_s / spec.seeds;
      row.mean.fuel_l += r.fuel_l / spec.seeds;
    }
    rows.push_back(row);
  }
  for (auto& row : rows) row.change = compare(rows.front().mean, row.mean);

  if (!spec.out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(spec.out_dir, ec);
    if (ec) throw OutputError("cannot create " + spec.out_dir.string() + ": " + ec.message());
    write_text(spec.out_dir / "sweep.csv", sweep_csv(rows));
  }
  return rows;
}

/// Least-squares slope of `y` against `x`.
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

}  // namespace cacc
