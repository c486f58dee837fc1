#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "fmt/core.h"
#include "json.hpp"
#include "spdlog/sinks/ostream_sink.h"
#include "spdlog/spdlog.h"

#include "covsim/calibrate.hpp"
#include "covsim/netio.hpp"
#include "covsim/scenario.hpp"
#include "covsim/sociability.hpp"
#include "covsim/toy_city.hpp"

#include "manifest.hpp"

namespace covsim::cli {

namespace fs = std::filesystem;

namespace {

class log {
public:
  log(std::ostream& sink, bool json) : json_{json} {
    auto s = std::make_shared<spdlog::sinks::ostream_sink_st>(sink, true);
    logger_ = std::make_shared<spdlog::logger>("covsim", std::move(s));
    logger_->set_pattern(json ? R"({"time":"%Y-%m-%dT%H:%M:%S.%e","level":"%l","msg":%v})"
                              : "[%l] %v");
    logger_->set_level(spdlog::level::info);
  }

  void info(std::string const& msg) { logger_->info(text(msg)); }
  void warn(std::string const& msg) { logger_->warn(text(msg)); }
  void error(std::string const& msg) { logger_->error(text(msg)); }

private:
  std::string text(std::string const& msg) const {
    return json_ ? nlohmann::json(msg).dump() : msg;
  }

  bool json_;
  std::shared_ptr<spdlog::logger> logger_;
};

std::string read_file(fs::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw parse_error{path.string(), "cannot open file"};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(fs::path const& path) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw error{fmt::format("cannot write '{}'", path.string())};
  }
  return out;
}

// ---- net ------------------------------------------------------------------

struct net_args {
  fs::path nodes;
  fs::path links;
  fs::path gtfs;
  std::optional<std::string> day;
  double snap_radius{kDefaultSnapRadius};
  bool geographic{false};
};

int cmd_net(net_args const& a, std::ostream& out, log& lg) {
  auto const road = load_road_network(a.nodes, a.links);
  gtfs_options opt;
  opt.service_date = a.day;
  opt.planar_coordinates = !a.geographic;
  std::vector<std::string> warnings;
  auto const schedule = load_gtfs_subset(a.gtfs, opt, &warnings);
  for (auto const& w : warnings) {
    lg.warn(w);
  }
  auto const report = validate_network(road, schedule, a.snap_radius);
  out << fmt::format("nodes={} links={} stops={} trips={} findings={}\n",
                     road.nodes.size(), road.links.size(),
                     schedule.stops.size(), schedule.trips.size(),
                     report.findings.size());
  for (auto const& f : report.findings) {
    out << fmt::format("{}: {}\n", f.subject, f.message);
  }
  return report.ok() ? kOk : kFindings;
}

// ---- run ------------------------------------------------------------------

struct run_args {
  fs::path matrix;
  fs::path assets;
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> iterations;
  bool events{false};
};

int cmd_run(run_args const& a, std::ostream& out, log& lg) {
  run_manifest manifest{"run"};
  stage_timer t_load;
  auto spec = load_matrix(a.matrix);
  if (a.seed) {
    for (auto& s : spec.scenarios) {
      s.seed = *a.seed;
    }
  }
  if (a.threads) {
    spec.sim.threads = *a.threads;
  }
  if (a.iterations) {
    spec.sim.iterations = *a.iterations;
  }
  spec.sim.check();
  auto const assets = load_assets(a.assets);
  manifest.add_input(a.matrix);
  manifest.add_input(a.assets);
  manifest.set_seed(spec.scenarios.front().seed);
  manifest.stage("load", t_load.seconds());
  lg.info(fmt::format("loaded {} agents, {} scenarios", assets.pop.agents.size(),
                      spec.scenarios.size()));

  stage_timer t_sim;
  auto const rows = run_matrix(spec.scenarios, assets, spec.sim);
  manifest.stage("simulate", t_sim.seconds());

  stage_timer t_write;
  fs::create_directories(a.out);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto const& row = rows[i];
    auto const& name = row.report.name;
    auto const report_path = a.out / fmt::format("report_{}.json", name);
    open_out(report_path) << scenario_report_to_json(row.report, &row.vs_baseline)
                          << '\n';
    manifest.add_output(report_path);
    auto const stats_path = a.out / fmt::format("stats_{}.csv", name);
    {
      auto s = open_out(stats_path);
      write_stats_csv(s, row.stats);
    }
    manifest.add_output(stats_path);
    if (a.events) {
      auto const& cfg = spec.scenarios[i];
      sim_network const net{assets.road, assets.schedules.get(cfg.schedule_variant),
                            spec.sim};
      auto const events_path = a.out / fmt::format("events_{}.jsonl", name);
      {
        auto s = open_out(events_path);
        write_events_jsonl(s, row.events, assets.pop, net);
      }
      manifest.add_output(events_path);
    }
    out << fmt::format("{}: trips={} transit_ratio={} car_ratio={}\n", name,
                       [&] {
                         std::int64_t n = 0;
                         for (auto const c : row.report.trips) {
                           n += c;
                         }
                         return n;
                       }(),
                       row.vs_baseline.ratio[index_of(mode::transit)]
                           ? fmt::format("{:.4f}", *row.vs_baseline.ratio[index_of(
                                                       mode::transit)])
                           : "undefined",
                       row.vs_baseline.ratio[index_of(mode::car)]
                           ? fmt::format("{:.4f}",
                                         *row.vs_baseline.ratio[index_of(mode::car)])
                           : "undefined");
  }
  auto const modeshare = a.out / "modeshare.csv";
  {
    auto s = open_out(modeshare);
    write_modeshare_csv(s, rows);
  }
  manifest.add_output(modeshare);
  manifest.stage("write", t_write.seconds());
  manifest.write(a.out / "manifest.json");
  lg.info(fmt::format("wrote {} reports to {}", rows.size(), a.out.string()));
  return kOk;
}

// ---- calibrate ------------------------------------------------------------

struct calibrate_args {
  fs::path base;
  fs::path targets;
  fs::path assets;
  fs::path out;
  std::optional<fs::path> matrix;
  std::string phase_name{"covid"};
  std::optional<std::string> schedule_variant;
  double capacity_factor{1.0};
  std::string baseline_params{"precovid_fit"};
  std::uint64_t seed{7};
  std::optional<int> iterations;
  std::optional<int> threads;
  double step{1.0};
  double tol_pp{1.0};
  int max_iter{50};
};

int cmd_calibrate(calibrate_args const& a, std::ostream& out, log& lg) {
  run_manifest manifest{"calibrate"};
  manifest.set_seed(a.seed);
  auto const base = mnl_params_from_json(read_file(a.base), a.base.string());
  auto const targets = load_targets(a.targets);
  auto const assets = load_assets(a.assets);
  manifest.add_input(a.base);
  manifest.add_input(a.targets);
  manifest.add_input(a.assets);

  sim_config sim;
  sim.iterations = 50;
  auto const matrix_path = a.matrix ? *a.matrix : a.assets / "matrix.json";
  if (a.matrix || fs::exists(matrix_path)) {
    sim = load_matrix(matrix_path).sim;
    if (!a.matrix) {
      manifest.add_input(matrix_path);
    } else {
      manifest.add_input(*a.matrix);
    }
  }
  if (a.iterations) {
    sim.iterations = *a.iterations;
  }
  if (a.threads) {
    sim.threads = *a.threads;
  }
  sim.check();

  auto const ph = parse_phase(a.phase_name);
  if (!ph) {
    throw error{fmt::format("unknown phase '{}'", a.phase_name)};
  }
  auto cfg = scenario_config::make("calibration", *ph, a.capacity_factor, a.seed);
  if (a.schedule_variant) {
    cfg.schedule_variant = *a.schedule_variant;
  }

  calibration_options opt;
  opt.step = a.step;
  opt.tol_pp = a.tol_pp;
  opt.max_iter = a.max_iter;
  auto const needs_baseline = std::any_of(
      begin(targets.values), end(targets.values), [](auto const& kv) {
        return parse_observable(kv.first)->kind == observable_kind::trips_ratio;
      });
  if (needs_baseline) {
    auto const it = assets.params.find(a.baseline_params);
    if (it == end(assets.params)) {
      throw error{fmt::format("unknown baseline parameters '{}'",
                              a.baseline_params)};
    }
    auto const baseline = run_scenario(
        scenario_config::make("baseline", phase::precovid, 1.0, a.seed), assets,
        sim, it->second);
    opt.baseline_trips = outcome_of(baseline.report).trips;
  }

  stage_timer t_cal;
  auto const res =
      calibrate_ascs(base, targets, scenario_simulator(cfg, assets, sim), opt);
  manifest.stage("calibrate", t_cal.seconds());
  lg.info(fmt::format("calibration finished after {} iterations, converged={}",
                      res.iterations, res.converged));
  open_out(a.out) << calibration_result_to_json(res) << '\n';
  manifest.add_output(a.out);
  manifest.write(fs::path{a.out}.replace_extension(".manifest.json"));

  out << fmt::format("iterations={} converged={} avg_abs_residual={:.6f}\n",
                     res.iterations, res.converged, res.avg_abs_residual);
  for (auto const& [name, r] : res.residuals) {
    out << fmt::format("  {} residual={:+.6f}\n", name, r);
  }
  return res.converged ? kOk : kFindings;
}

// ---- sociability ----------------------------------------------------------

struct sociability_args {
  fs::path frames;
  fs::path out;
  std::optional<fs::path> profile;
  double tz{0.0};
};

int cmd_sociability(sociability_args const& a, std::ostream& out, log& lg) {
  auto const frames = load_frames(a.frames);
  if (frames.empty()) {
    throw parse_error{a.frames.string(), "no frames in detection stream"};
  }
  auto const report = aggregate(frames);
  open_out(a.out) << sociability_report_to_json(report) << '\n';
  if (a.profile) {
    auto s = open_out(*a.profile);
    write_profile_csv(s, make_temporal_profile(frames, a.tz));
  }
  lg.info(fmt::format("aggregated {} frames", report.frames));
  out << fmt::format(
      "frames={} avg_ped_density={:.4f} max_ped_density={} pairs={} "
      "violations={} safety_rate={}\n",
      report.frames, report.avg_ped_density, report.max_ped_density,
      report.total_pairs, report.total_violations,
      report.safety_rate ? fmt::format("{:.6f}", *report.safety_rate)
                         : "undefined");
  return kOk;
}

// ---- toy ------------------------------------------------------------------

struct toy_args {
  fs::path out;
  std::uint64_t seed{7};
  int agents_per_zone{toy::kAgentsPerZone};
  int iterations{50};
};

int cmd_toy(toy_args const& a, std::ostream& out, log& lg) {
  if (a.agents_per_zone < 1 || a.iterations < 1) {
    throw error{"agents-per-zone and iterations must be >= 1"};
  }
  auto const assets = toy::assets(a.seed, a.agents_per_zone);
  write_assets(assets, a.out);
  open_out(a.out / "matrix.json") << matrix_to_json(toy::matrix(a.seed, a.iterations))
                                  << '\n';
  lg.info(fmt::format("wrote toy city assets to {}", a.out.string()));
  out << fmt::format("agents={} nodes={} links={} variants={}\n",
                     assets.pop.agents.size(), assets.road.nodes.size(),
                     assets.road.links.size(), assets.schedules.labels().size());
  return kOk;
}

}  // namespace

int run(int const argc, char const* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Scenario-driven agent-based transport simulator and "
               "sociability metrics"};
  app.name("covsim");
  app.require_subcommand(1);
  bool json_logs = false;
  app.add_flag("--json-logs", json_logs, "Log to stderr as JSON lines");
  app.set_version_flag("--version", COVSIM_VERSION);

  net_args na;
  auto* net = app.add_subcommand("net", "Load and validate a road network and GTFS feed");
  net->add_option("--nodes", na.nodes, "nodes.csv (node_id,x,y)")->required();
  net->add_option("--links", na.links,
                  "links.csv (link_id,from_node,to_node,length_m,capacity_vph,"
                  "freespeed_mps,modes)")
      ->required();
  net->add_option("--gtfs", na.gtfs, "GTFS feed directory")->required();
  net->add_option("--day", na.day, "Service date YYYYMMDD for calendar.txt");
  net->add_option("--snap-radius", na.snap_radius,
                  "Stop-to-node snap radius in meters")
      ->capture_default_str();
  net->add_flag("--geographic", na.geographic,
                "stop_lat/stop_lon are degrees rather than planar meters");

  run_args ra;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario matrix");
  run_cmd->add_option("--matrix", ra.matrix, "Scenario matrix JSON")->required();
  run_cmd->add_option("--assets", ra.assets, "Assets directory")->required();
  run_cmd->add_option("--out", ra.out, "Output directory")->required();
  run_cmd->add_option("--seed", ra.seed, "Seed for every scenario");
  run_cmd->add_option("--threads", ra.threads, "Worker threads for routing");
  run_cmd->add_option("--iterations", ra.iterations, "Override iterations");
  run_cmd->add_flag("--events", ra.events,
                    "Also write the last iteration's events as JSON lines");

  calibrate_args ca;
  auto* cal = app.add_subcommand("calibrate", "Fit alternative-specific constants to targets");
  cal->add_option("--base", ca.base, "Starting choice parameters JSON")->required();
  cal->add_option("--targets", ca.targets, "Targets JSON {observable: value}")
      ->required();
  cal->add_option("--assets", ca.assets, "Assets directory")->required();
  cal->add_option("--out", ca.out, "Calibration result JSON")->required();
  cal->add_option("--matrix", ca.matrix,
                  "Matrix JSON for sim settings (default <assets>/matrix.json)");
  cal->add_option("--phase", ca.phase_name, "Phase simulated while fitting")
      ->capture_default_str();
  cal->add_option("--schedule-variant", ca.schedule_variant,
                  "Schedule variant (default by phase)");
  cal->add_option("--capacity-factor", ca.capacity_factor, "Transit capacity factor")
      ->capture_default_str();
  cal->add_option("--baseline-params", ca.baseline_params,
                  "Parameter set of the precovid baseline for ratio targets")
      ->capture_default_str();
  cal->add_option("--seed", ca.seed, "Simulation seed")->capture_default_str();
  cal->add_option("--iterations", ca.iterations, "Override iterations");
  cal->add_option("--threads", ca.threads, "Worker threads for routing");
  cal->add_option("--step", ca.step, "Update step")->capture_default_str();
  cal->add_option("--tol", ca.tol_pp, "Tolerance in percentage points")
      ->capture_default_str();
  cal->add_option("--max-iter", ca.max_iter, "Maximum updates")->capture_default_str();

  sociability_args sa;
  auto* soc = app.add_subcommand("sociability", "Sociability metrics from detection logs");
  soc->add_option("--frames", sa.frames, "Detection frames as JSON lines")->required();
  soc->add_option("--out", sa.out, "Report JSON")->required();
  soc->add_option("--profile", sa.profile, "Hourly profile CSV");
  soc->add_option("--tz", sa.tz, "Hours added to UTC for local time")
      ->capture_default_str();

  toy_args ta;
  auto* toy_cmd = app.add_subcommand("toy", "Write the toy city assets and matrix");
  toy_cmd->add_option("--out", ta.out, "Output directory")->required();
  toy_cmd->add_option("--seed", ta.seed, "Population and scenario seed")
      ->capture_default_str();
  toy_cmd->add_option("--agents-per-zone", ta.agents_per_zone, "Agents per zone")
      ->capture_default_str();
  toy_cmd->add_option("--iterations", ta.iterations, "Iterations in matrix.json")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (CLI::ParseError const& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  log lg{err, json_logs};
  try {
    if (net->parsed()) {
      return cmd_net(na, out, lg);
    }
    if (run_cmd->parsed()) {
      return cmd_run(ra, out, lg);
    }
    if (cal->parsed()) {
      return cmd_calibrate(ca, out, lg);
    }
    if (soc->parsed()) {
      return cmd_sociability(sa, out, lg);
    }
    if (toy_cmd->parsed()) {
      return cmd_toy(ta, out, lg);
    }
  } catch (std::exception const& e) {
    lg.error(e.what());
    return kInputError;
  }
  return kInputError;
}

}  // namespace covsim::cli
