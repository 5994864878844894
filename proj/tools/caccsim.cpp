// caccsim: command line front end for the corridor simulator.
//
//   caccsim run <scenario> [--seed N] --out DIR [--no-trajectories]
//   caccsim sweep <scenario> [--mpr LIST] [--seeds K] --out DIR [--jobs J]
//   caccsim validate <scenario>
//
// Exit status: 0 success, 1 invalid input, 2 runtime failure.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "cacc/cacc.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

std::vector<double> parse_mpr_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    while (used < item.size() && item[used] == ' ') ++used;
    if (item.empty() || used != item.size()) throw std::invalid_argument("bad MPR value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

void print_warnings(const cacc::ScenarioConfig& c) {
  for (const auto& w : cacc::config_warnings(c)) fmt::print(stderr, "warning: {}: {}\n", w.field, w.message);
}

int cmd_validate(const std::string& path) {
  const auto cfg = cacc::load_scenario(path);
  print_warnings(cfg);
  fmt::print("{}: ok ({} lanes, {} links, {:.0f} m, preset {})\n", path, cfg.lanes, cfg.links.size(),
             cfg.corridor_length_m(), cacc::to_string(cfg.preset));
  return kExitOk;
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out, bool trajectories) {
  auto cfg = cacc::load_scenario(path);
  if (seed) cfg.seed = *seed;
  print_warnings(cfg);

  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw cacc::OutputError("cannot create " + out + ": " + ec.message());

  cacc::Engine engine(cfg);
  std::optional<cacc::TrajectoryCsvWriter> writer;
  if (trajectories) {
    writer.emplace(std::filesystem::path(out) / "trajectories.csv");
    engine.set_trajectory_sink([&writer](const cacc::TrajectoryRow& row) { writer->write(row); });
  }
  cacc::RunResult result = engine.run();
  if (writer) writer->close();
  cacc::write_outputs(result, cfg, out, cacc::WriteOptions{.trajectories = false});

  fmt::print("seed {}: {} trips completed, {} still on corridor, {} lifecycle events\n", cfg.seed,
             result.records.size(), result.unfinished.size(), result.events.size());
  if (result.summary) {
    const auto& f = result.summary->fleet;
    fmt::print("fleet means: travel time {:.3f} s, delay {:.3f} s, fuel {:.6f} L\n", f.travel_time_s, f.delay_s,
               f.fuel_l);
  }
  return kExitOk;
}

int cmd_sweep(const std::string& path, const std::string& mpr, int seeds, std::uint64_t first_seed,
              const std::string& out, unsigned jobs) {
  cacc::SweepSpec spec;
  spec.base = cacc::load_scenario(path);
  if (!mpr.empty()) spec.mpr_pct = parse_mpr_list(mpr);
  spec.seeds = seeds;
  spec.first_seed = first_seed;
  spec.out_dir = out;
  spec.jobs = jobs;
  if (auto problems = cacc::sweep_problems(spec); !problems.empty()) {
    for (const auto& p : problems) fmt::print(stderr, "error: {}\n", p);
    return kExitInvalid;
  }
  print_warnings(spec.base);
  const auto rows = cacc::run_sweep(spec);
  fmt::print("{}", cacc::sweep_csv(rows));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Microscopic highway corridor simulator with cooperative platooning"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;

  auto* run = app.add_subcommand("run", "Run one scenario and write trajectories, events and a summary");
  std::optional<std::uint64_t> seed;
  bool no_traj = false;
  run->add_option("scenario", scenario, "Scenario file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Output directory")->required();
  run->add_flag("--no-trajectories", no_traj, "Skip trajectories.csv");

  auto* sweep = app.add_subcommand("sweep", "Run every (MPR, seed) pair and write sweep.csv");
  std::string mpr;
  int seeds = 6;
  std::uint64_t first_seed = 1;
  unsigned jobs = 0;
  sweep->add_option("scenario", scenario, "Scenario file")->required();
  sweep->add_option("--mpr", mpr, "Comma separated market penetration rates in percent");
  sweep->add_option("--seeds", seeds, "Seeds per MPR");
  sweep->add_option("--first-seed", first_seed, "First seed; seeds are consecutive");
  sweep->add_option("--out", out, "Output directory")->required();
  sweep->add_option("--jobs", jobs, "Parallel runs (0 = hardware threads)");

  auto* validate = app.add_subcommand("validate", "Check a scenario file and report problems");
  validate->add_option("scenario", scenario, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(scenario, seed, out, !no_traj);
    if (*sweep) return cmd_sweep(scenario, mpr, seeds, first_seed, out, jobs);
    if (*validate) return cmd_validate(scenario);
  } catch (const cacc::ScenarioError& e) {
    fmt::print(stderr, "{}: invalid scenario\n{}\n", scenario, e.what());
    return kExitInvalid;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitInvalid;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
  return kExitRuntime;
}
