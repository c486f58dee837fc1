#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covsim/calibrate.hpp"
#include "covsim/engine.hpp"
#include "covsim/netio.hpp"
#include "covsim/population.hpp"

namespace covsim {

// "covid" for covid, p1 and p2; "regular" for precovid, p3 and p4.
std::string default_schedule_variant(phase);
// "precovid_fit" for precovid, "covid_fit" otherwise.
std::string default_choice_params(phase);

struct scenario_config {
  std::string name;
  phase ph{phase::precovid};
  std::string schedule_variant;
  double capacity_factor{1.0};
  std::string choice_params;
  std::uint64_t seed{1};

  // Fills empty schedule_variant and choice_params with the phase defaults.
  static scenario_config make(std::string name, phase, double capacity_factor,
                              std::uint64_t seed);
};

struct scenario_assets {
  road_network road;
  schedule_variants schedules;
  population pop;
  std::map<std::string, mnl_params> params;
  return_schedule returns;
};

// Layout: nodes.csv, links.csv, gtfs/<variant>/, population.json,
// return_schedule.csv, params/<label>.json.
scenario_assets load_assets(std::filesystem::path const& dir,
                            gtfs_options const& = {});
void write_assets(scenario_assets const&, std::filesystem::path const& dir);

// Throws error naming the first unresolved reference or invalid field.
void check_scenario(scenario_config const&, scenario_assets const&);

struct scenario_report {
  std::string name;
  phase ph{phase::precovid};
  std::string schedule_variant;
  double capacity_factor{1.0};
  std::string choice_params;
  std::uint64_t seed{0};
  int iterations{0};

  // Trips completed per mode in the last iteration; shares are over these.
  mode_counts trips{};
  mode_values shares{};
  mode_counts planned{};
  mode_counts stuck{};
  mode_counts denied_terminated{};
  std::int64_t denied_boardings{0};
  std::optional<double> wfh_rate;
  std::size_t tours_removed{0};
  double avg_score{0.0};

  bool operator==(scenario_report const&) const = default;
};

struct scenario_run {
  scenario_report report;
  std::vector<iteration_stats> stats;
  event_log events;
  population pop;  // after work-from-home suppression
};

// apply_wfh -> evolve -> mode share, with the named choice parameters.
scenario_run run_scenario(scenario_config const&, scenario_assets const&,
                          sim_config const&);
// Same pipeline with explicit choice parameters.
scenario_run run_scenario(scenario_config const&, scenario_assets const&,
                          sim_config const&, mnl_params const&);

struct comparison {
  std::string baseline;
  std::string name;
  // other / baseline per mode; empty where the baseline has no trips.
  std::array<std::optional<double>, kModeCount> ratio{};
  mode_values share_delta_pp{};
};

comparison compare(scenario_report const& baseline,
                   scenario_report const& other);

struct matrix_row {
  scenario_report report;
  comparison vs_baseline;
  std::vector<iteration_stats> stats;
  event_log events;  // last iteration
};

// Runs the first precovid scenario as the baseline, then the others in list
// order. Throws error when no precovid scenario is listed.
std::vector<matrix_row> run_matrix(std::span<scenario_config const>,
                                   scenario_assets const&, sim_config const&);

// Simulation callback for calibrate_ascs on the given scenario.
simulate_fn scenario_simulator(scenario_config const&, scenario_assets const&,
                               sim_config const&);
sim_outcome outcome_of(scenario_report const&);

struct matrix_spec {
  sim_config sim;
  std::vector<scenario_config> scenarios;
};

// {"sim": {...}, "seed": n, "scenarios": [{"name", "phase",
// "schedule_variant"?, "capacity_factor"?, "choice_params"?, "seed"?}]}
matrix_spec matrix_from_json(std::string const& text,
                             std::string const& source = "<memory>");
matrix_spec load_matrix(std::filesystem::path const&);
std::string matrix_to_json(matrix_spec const&);

std::string sim_config_to_json(sim_config const&);

std::string scenario_report_to_json(scenario_report const&,
                                    comparison const* vs_baseline = nullptr);

// Columns: scenario,mode,trips,share,ratio_vs_precovid,share_delta_pp.
void write_modeshare_csv(std::ostream&, std::span<matrix_row const>);

}  // namespace covsim
