#include "covsim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fmt/core.h"
#include "json.hpp"

#include "covsim/csv.hpp"

using json = nlohmann::json;

namespace covsim {

namespace fs = std::filesystem;

std::string default_schedule_variant(phase const p) {
  switch (p) {
    case phase::covid:
    case phase::p1:
    case phase::p2: return "covid";
    case phase::precovid:
    case phase::p3:
    case phase::p4: return "regular";
  }
  return "regular";
}

std::string default_choice_params(phase const p) {
  return p == phase::precovid ? "precovid_fit" : "covid_fit";
}

scenario_config scenario_config::make(std::string name, phase const p,
                                      double const capacity_factor,
                                      std::uint64_t const seed) {
  return {std::move(name),           p, default_schedule_variant(p),
          capacity_factor,           default_choice_params(p), seed};
}

namespace {

std::string read_file(fs::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw parse_error{path.string(), "cannot open file"};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(fs::path const& path, std::string const& text) {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw error{fmt::format("cannot write '{}'", path.string())};
  }
  out << text;
}

}  // namespace

scenario_assets load_assets(fs::path const& dir, gtfs_options const& opt) {
  if (!fs::is_directory(dir)) {
    throw parse_error{dir.string(), "assets directory not found"};
  }
  scenario_assets a;
  a.road = load_road_network(dir / "nodes.csv", dir / "links.csv");
  auto const gtfs = dir / "gtfs";
  if (!fs::is_directory(gtfs)) {
    throw parse_error{gtfs.string(), "schedule variants directory not found"};
  }
  std::vector<fs::path> variants;
  for (auto const& e : fs::directory_iterator{gtfs}) {
    if (e.is_directory()) {
      variants.push_back(e.path());
    }
  }
  std::sort(begin(variants), end(variants));
  for (auto const& v : variants) {
    a.schedules.add({v.filename().string(), load_gtfs_subset(v, opt)});
  }
  a.pop = load_population(dir / "population.json");
  a.returns = load_return_schedule(dir / "return_schedule.csv");
  auto const params = dir / "params";
  if (!fs::is_directory(params)) {
    throw parse_error{params.string(), "params directory not found"};
  }
  std::vector<fs::path> files;
  for (auto const& e : fs::directory_iterator{params}) {
    if (e.is_regular_file() && e.path().extension() == ".json") {
      files.push_back(e.path());
    }
  }
  std::sort(begin(files), end(files));
  for (auto const& f : files) {
    a.params[f.stem().string()] =
        mnl_params_from_json(read_file(f), f.string());
  }
  return a;
}

void write_assets(scenario_assets const& a, fs::path const& dir) {
  fs::create_directories(dir / "gtfs");
  fs::create_directories(dir / "params");
  write_road_network(a.road, dir / "nodes.csv", dir / "links.csv");
  for (auto const& label : a.schedules.labels()) {
    fs::create_directories(dir / "gtfs" / label);
    write_gtfs_subset(a.schedules.get(label), dir / "gtfs" / label);
  }
  write_population(a.pop, dir / "population.json");
  write_return_schedule(a.returns, dir / "return_schedule.csv");
  for (auto const& [label, p] : a.params) {
    write_file(dir / "params" / (label + ".json"), mnl_params_to_json(p) + "\n");
  }
}

void check_scenario(scenario_config const& c, scenario_assets const& a) {
  if (c.name.empty()) {
    throw error{"scenario name is empty"};
  }
  if (c.name.find_first_of("/\\,\"") != std::string::npos) {
    throw error{fmt::format("scenario name '{}' contains a reserved character",
                            c.name)};
  }
  if (!(c.capacity_factor > 0.0 && c.capacity_factor <= 1.0)) {
    throw error{fmt::format("scenario '{}': capacity_factor {} not in (0, 1]",
                            c.name, c.capacity_factor)};
  }
  if (!a.schedules.contains(c.schedule_variant)) {
    throw error{fmt::format("scenario '{}': unknown schedule variant '{}'",
                            c.name, c.schedule_variant)};
  }
  if (!a.params.contains(c.choice_params)) {
    throw error{fmt::format("scenario '{}': unknown choice parameters '{}'",
                            c.name, c.choice_params)};
  }
}

scenario_run run_scenario(scenario_config const& c, scenario_assets const& a,
                          sim_config const& sim) {
  check_scenario(c, a);
  return run_scenario(c, a, sim, a.params.at(c.choice_params));
}

scenario_run run_scenario(scenario_config const& c, scenario_assets const& a,
                          sim_config const& sim, mnl_params const& params) {
  if (!a.schedules.contains(c.schedule_variant)) {
    throw error{fmt::format("scenario '{}': unknown schedule variant '{}'",
                            c.name, c.schedule_variant)};
  }
  auto cfg = sim;
  cfg.capacity_factor = c.capacity_factor;
  cfg.check();

  scenario_run run;
  auto& r = run.report;
  r.name = c.name;
  r.ph = c.ph;
  r.schedule_variant = c.schedule_variant;
  r.capacity_factor = c.capacity_factor;
  r.choice_params = c.choice_params;
  r.seed = c.seed;
  r.iterations = cfg.iterations;

  if (c.ph == phase::precovid) {
    run.pop = a.pop;
  } else {
    auto wfh = apply_wfh(a.pop, a.returns, c.ph, c.seed);
    r.tours_removed = wfh.tours_removed;
    r.wfh_rate = wfh_rate(a.pop, wfh.pop);
    run.pop = std::move(wfh.pop);
  }

  sim_network const net{a.road, a.schedules.get(c.schedule_variant), cfg};
  auto res = evolve(run.pop, net, params, cfg, c.seed);
  auto const& last = res.stats.back();
  r.trips = last.arrived;
  r.planned = last.planned;
  r.stuck = last.stuck;
  r.denied_terminated = last.denied_terminated;
  r.denied_boardings = last.denied_boardings;
  r.avg_score = last.avg_score;
  std::int64_t total = 0;
  for (auto const n : r.trips) {
    total += n;
  }
  for (std::size_t i = 0; i < kModeCount; ++i) {
    r.shares[i] = total > 0 ? static_cast<double>(r.trips[i]) /
                                  static_cast<double>(total)
                            : 0.0;
  }
  run.stats = std::move(res.stats);
  run.events = std::move(res.events);
  return run;
}

comparison compare(scenario_report const& base, scenario_report const& other) {
  comparison c;
  c.baseline = base.name;
  c.name = other.name;
  for (std::size_t i = 0; i < kModeCount; ++i) {
    if (base.trips[i] > 0) {
      c.ratio[i] = static_cast<double>(other.trips[i]) /
                   static_cast<double>(base.trips[i]);
    }
    c.share_delta_pp[i] = 100.0 * (other.shares[i] - base.shares[i]);
  }
  return c;
}

std::vector<matrix_row> run_matrix(std::span<scenario_config const> scenarios,
                                   scenario_assets const& a,
                                   sim_config const& sim) {
  auto const base_it =
      std::find_if(begin(scenarios), end(scenarios),
                   [](scenario_config const& c) { return c.ph == phase::precovid; });
  if (base_it == end(scenarios)) {
    throw error{"scenario matrix has no precovid scenario"};
  }
  for (auto const& c : scenarios) {
    check_scenario(c, a);
    if (std::count_if(begin(scenarios), end(scenarios),
                      [&](scenario_config const& o) { return o.name == c.name; }) >
        1) {
      throw error{fmt::format("duplicate scenario name '{}'", c.name)};
    }
  }
  auto const base_index =
      static_cast<std::size_t>(std::distance(begin(scenarios), base_it));
  std::vector<std::optional<matrix_row>> rows(scenarios.size());
  auto base = run_scenario(*base_it, a, sim);
  rows[base_index] =
      matrix_row{base.report, compare(base.report, base.report),
                 std::move(base.stats), std::move(base.events)};
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (i == base_index) {
      continue;
    }
    auto run = run_scenario(scenarios[i], a, sim);
    rows[i] = matrix_row{run.report, compare(base.report, run.report),
                         std::move(run.stats), std::move(run.events)};
  }
  std::vector<matrix_row> out;
  out.reserve(rows.size());
  for (auto& r : rows) {
    out.push_back(std::move(*r));
  }
  return out;
}

sim_outcome outcome_of(scenario_report const& r) {
  sim_outcome o;
  o.shares = r.shares;
  for (std::size_t i = 0; i < kModeCount; ++i) {
    o.trips[i] = static_cast<double>(r.trips[i]);
  }
  return o;
}

simulate_fn scenario_simulator(scenario_config const& c,
                               scenario_assets const& a,
                               sim_config const& sim) {
  return [c, &a, sim](mnl_params const& p) {
    return outcome_of(run_scenario(c, a, sim, p).report);
  };
}

// ---- JSON -----------------------------------------------------------------

namespace {

template <typename T>
void read_field(json const& obj, char const* key, T& out) {
  if (auto const it = obj.find(key); it != obj.end()) {
    out = it->get<T>();
  }
}

sim_config sim_from_json(json const& j) {
  static constexpr std::array kKnown = {
      "timestep",       "iterations",       "replan_fraction",
      "travel_time_bin", "score_beta_perf", "score_beta_travel",
      "denied_boarding_penalty", "stuck_penalty", "max_wait",
      "stuck_time",     "end_time",         "walk_speed_mps",
      "bike_speed_mps", "ridehail_wait",    "bikeshare_access",
      "transit_max_access_m", "snap_radius_m", "vehicle_length_m",
      "threads",        "modes",            "costs"};
  for (auto const& [k, v] : j.items()) {
    if (std::find(begin(kKnown), end(kKnown), k) == end(kKnown)) {
      throw error{fmt::format("unknown sim setting '{}'", k)};
    }
  }
  sim_config s;
  read_field(j, "timestep", s.timestep);
  read_field(j, "iterations", s.iterations);
  read_field(j, "replan_fraction", s.replan_fraction);
  read_field(j, "travel_time_bin", s.travel_time_bin);
  read_field(j, "score_beta_perf", s.score_beta_perf);
  read_field(j, "score_beta_travel", s.score_beta_travel);
  read_field(j, "denied_boarding_penalty", s.denied_boarding_penalty);
  read_field(j, "stuck_penalty", s.stuck_penalty);
  read_field(j, "max_wait", s.max_wait);
  read_field(j, "stuck_time", s.stuck_time);
  read_field(j, "end_time", s.end_time);
  read_field(j, "walk_speed_mps", s.walk_speed_mps);
  read_field(j, "bike_speed_mps", s.bike_speed_mps);
  read_field(j, "ridehail_wait", s.ridehail_wait);
  read_field(j, "bikeshare_access", s.bikeshare_access);
  read_field(j, "transit_max_access_m", s.transit_max_access_m);
  read_field(j, "snap_radius_m", s.snap_radius_m);
  read_field(j, "vehicle_length_m", s.vehicle_length_m);
  read_field(j, "threads", s.threads);
  if (auto const it = j.find("modes"); it != j.end()) {
    s.modes = {};
    for (auto const& m : *it) {
      auto const name = m.get<std::string>();
      auto const parsed = parse_mode(name);
      if (!parsed) {
        throw error{fmt::format("unknown mode '{}'", name)};
      }
      s.modes.insert(*parsed);
    }
  }
  if (auto const it = j.find("costs"); it != j.end()) {
    read_field(*it, "car_per_km", s.costs.car_per_km);
    read_field(*it, "car_fixed", s.costs.car_fixed);
    read_field(*it, "transit_fare", s.costs.transit_fare);
    read_field(*it, "ridehail_base", s.costs.ridehail_base);
    read_field(*it, "ridehail_per_km", s.costs.ridehail_per_km);
    read_field(*it, "bikeshare_fare", s.costs.bikeshare_fare);
  }
  s.check();
  return s;
}

json sim_to_json(sim_config const& s) {
  json modes = json::array();
  for (auto const m : kAllModes) {
    if (s.modes.contains(m)) {
      modes.push_back(to_string(m));
    }
  }
  return {{"timestep", s.timestep},
          {"iterations", s.iterations},
          {"replan_fraction", s.replan_fraction},
          {"travel_time_bin", s.travel_time_bin},
          {"score_beta_perf", s.score_beta_perf},
          {"score_beta_travel", s.score_beta_travel},
          {"denied_boarding_penalty", s.denied_boarding_penalty},
          {"stuck_penalty", s.stuck_penalty},
          {"max_wait", s.max_wait},
          {"stuck_time", s.stuck_time},
          {"end_time", s.end_time},
          {"walk_speed_mps", s.walk_speed_mps},
          {"bike_speed_mps", s.bike_speed_mps},
          {"ridehail_wait", s.ridehail_wait},
          {"bikeshare_access", s.bikeshare_access},
          {"transit_max_access_m", s.transit_max_access_m},
          {"snap_radius_m", s.snap_radius_m},
          {"vehicle_length_m", s.vehicle_length_m},
          {"threads", s.threads},
          {"modes", modes},
          {"costs",
           {{"car_per_km", s.costs.car_per_km},
            {"car_fixed", s.costs.car_fixed},
            {"transit_fare", s.costs.transit_fare},
            {"ridehail_base", s.costs.ridehail_base},
            {"ridehail_per_km", s.costs.ridehail_per_km},
            {"bikeshare_fare", s.costs.bikeshare_fare}}}};
}

json counts_json(mode_counts const& c) {
  json j = json::object();
  for (auto const m : kAllModes) {
    j[std::string{to_string(m)}] = c[index_of(m)];
  }
  return j;
}

}  // namespace

matrix_spec matrix_from_json(std::string const& text,
                             std::string const& source) {
  matrix_spec spec;
  try {
    auto const doc = json::parse(text);
    spec.sim = sim_from_json(doc.value("sim", json::object()));
    auto const seed = doc.value("seed", std::uint64_t{1});
    for (auto const& s : doc.at("scenarios")) {
      auto const ph_name = s.at("phase").get<std::string>();
      auto const ph = parse_phase(ph_name);
      if (!ph) {
        throw error{fmt::format("unknown phase '{}'", ph_name)};
      }
      auto c = scenario_config::make(s.at("name").get<std::string>(), *ph,
                                     s.value("capacity_factor", 1.0),
                                     s.value("seed", seed));
      read_field(s, "schedule_variant", c.schedule_variant);
      read_field(s, "choice_params", c.choice_params);
      spec.scenarios.push_back(std::move(c));
    }
  } catch (json::exception const& e) {
    throw parse_error{source, e.what()};
  } catch (parse_error const&) {
    throw;
  } catch (error const& e) {
    throw parse_error{source, e.what()};
  }
  if (spec.scenarios.empty()) {
    throw parse_error{source, "scenario list is empty"};
  }
  return spec;
}

matrix_spec load_matrix(fs::path const& path) {
  return matrix_from_json(read_file(path), path.string());
}

std::string matrix_to_json(matrix_spec const& spec) {
  json scenarios = json::array();
  for (auto const& c : spec.scenarios) {
    scenarios.push_back({{"name", c.name},
                         {"phase", to_string(c.ph)},
                         {"schedule_variant", c.schedule_variant},
                         {"capacity_factor", c.capacity_factor},
                         {"choice_params", c.choice_params},
                         {"seed", c.seed}});
  }
  return json{{"sim", sim_to_json(spec.sim)}, {"scenarios", scenarios}}.dump(2);
}

std::string sim_config_to_json(sim_config const& s) {
  return sim_to_json(s).dump(2);
}

std::string scenario_report_to_json(scenario_report const& r,
                                    comparison const* cmp) {
  json shares = json::object();
  for (auto const m : kAllModes) {
    shares[std::string{to_string(m)}] = r.shares[index_of(m)];
  }
  json doc = {{"name", r.name},
              {"phase", to_string(r.ph)},
              {"schedule_variant", r.schedule_variant},
              {"capacity_factor", r.capacity_factor},
              {"choice_params", r.choice_params},
              {"seed", r.seed},
              {"iterations", r.iterations},
              {"trips", counts_json(r.trips)},
              {"shares", shares},
              {"planned", counts_json(r.planned)},
              {"stuck", counts_json(r.stuck)},
              {"denied_terminated", counts_json(r.denied_terminated)},
              {"denied_boardings", r.denied_boardings},
              {"wfh_rate", r.wfh_rate ? json(*r.wfh_rate) : json(nullptr)},
              {"tours_removed", r.tours_removed},
              {"avg_score", r.avg_score}};
  if (cmp != nullptr) {
    json ratio = json::object();
    json delta = json::object();
    for (auto const m : kAllModes) {
      auto const i = index_of(m);
      ratio[std::string{to_string(m)}] =
          cmp->ratio[i] ? json(*cmp->ratio[i]) : json(nullptr);
      delta[std::string{to_string(m)}] = cmp->share_delta_pp[i];
    }
    doc["comparison"] = {{"baseline", cmp->baseline},
                         {"trip_ratio", ratio},
                         {"share_delta_pp", delta}};
  }
  return doc.dump(2);
}

void write_modeshare_csv(std::ostream& out, std::span<matrix_row const> rows) {
  out << "scenario,mode,trips,share,ratio_vs_precovid,share_delta_pp\n";
  for (auto const& row : rows) {
    for (auto const m : kAllModes) {
      auto const i = index_of(m);
      auto const& ratio = row.vs_baseline.ratio[i];
      out << csv_escape(row.report.name) << ',' << to_string(m) << ','
          << row.report.trips[i] << ',' << fmt::format("{:.6f}", row.report.shares[i])
          << ',' << (ratio ? fmt::format("{:.6f}", *ratio) : std::string{})
          << ',' << fmt::format("{:.4f}", row.vs_baseline.share_delta_pp[i])
          << '\n';
    }
  }
}

}  // namespace covsim
