#include "fixtures.hpp"

#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "fmt/core.h"

namespace covsim::test {

namespace fs = std::filesystem;

fs::path fixture(std::string_view const rel) {
  return fs::path{COVSIM_FIXTURE_DIR} / rel;
}

temp_dir::temp_dir() {
  static std::uint64_t counter = 0;
  std::random_device rd;
  path_ = fs::temp_directory_path() /
          fmt::format("covsim_test_{}_{}", rd(), counter++);
  fs::create_directories(path_);
}

temp_dir::~temp_dir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

void write_text(fs::path const& p, std::string_view const text) {
  if (p.has_parent_path()) {
    fs::create_directories(p.parent_path());
  }
  std::ofstream out{p, std::ios::binary};
  out << text;
}

std::string read_text(fs::path const& p) {
  std::ifstream in{p, std::ios::binary};
  if (!in) {
    throw std::runtime_error{"cannot read " + p.string()};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void world::plan_all(mode const m) {
  if (!net) {
    build_net();
  }
  travel_feedback const free_flow;
  plans.clear();
  for (std::size_t i = 0; i < pop.agents.size(); ++i) {
    agent_plan p;
    p.agent = i;
    p.trips = agenda_trips(pop.agents[i], road);
    auto const tours = p.trips.empty() ? 0 : p.trips.back().tour + 1;
    p.tour_modes.assign(tours, m);
    route_plan(p, *net, cfg, free_flow);
    plans.push_back(std::move(p));
  }
}

agent make_agent(std::string id, std::string const& zone,
                 std::vector<std::pair<std::string, seconds_t>> const& stops,
                 std::vector<activity_kind> const& kinds) {
  agent a;
  a.id = std::move(id);
  a.home_zone = zone;
  a.industry = "x";
  for (std::size_t i = 0; i < stops.size(); ++i) {
    a.agenda.push_back({kinds[i], zone, stops[i].first, stops[i].second});
  }
  return a;
}

world boarding_world(int const agents, int const capacity, double const factor,
                     int const vehicles) {
  world w;
  w.road.nodes = {{"H", 0.0, 0.0}, {"W", 2000.0, 0.0}};
  w.road.links = {{"HW", 0, 1, 2000.0, 1800.0, 10.0, kLinkCar | kLinkBus},
                  {"WH", 1, 0, 2000.0, 1800.0, 10.0, kLinkCar | kLinkBus}};
  w.road.finalize();

  w.schedule.stops = {{"SH", 0.0, 0.0, "H"}, {"SW", 2000.0, 0.0, "W"}};
  w.schedule.routes = {{"out", 3, capacity}, {"back", 3, 1000}};
  for (int v = 0; v < vehicles; ++v) {
    auto const dep = 8 * 3600 + v * 600;
    w.schedule.trips.push_back(
        {fmt::format("out{}", v), "out", "all",
         {{0, dep, dep, 1}, {1, dep + 300, dep + 300, 2}}});
  }
  w.schedule.trips.push_back(
      {"back0", "back", "all", {{1, 61200, 61200, 1}, {0, 61500, 61500, 2}}});

  w.pop.zones = {"z"};
  using K = activity_kind;
  for (int i = 0; i < agents; ++i) {
    w.pop.agents.push_back(make_agent(
        fmt::format("a{:03}", i), "z",
        {{"H", 7 * 3600 + 50 * 60}, {"W", 16 * 3600 + 50 * 60}, {"H", kDayEnd}},
        {K::home, K::work, K::home}));
  }
  w.cfg.capacity_factor = factor;
  w.plan_all(mode::transit);
  return w;
}

world car_world(int const agents, seconds_t const gap,
                double const capacity_vph) {
  world w;
  w.road.nodes = {{"A", 0.0, 0.0}, {"B", 1000.0, 0.0}};
  w.road.links = {{"AB", 0, 1, 1000.0, capacity_vph, 10.0, kLinkCar},
                  {"BA", 1, 0, 1000.0, capacity_vph, 10.0, kLinkCar}};
  w.road.finalize();
  w.pop.zones = {"z"};
  using K = activity_kind;
  for (int i = 0; i < agents; ++i) {
    w.pop.agents.push_back(make_agent(
        fmt::format("c{:03}", i), "z",
        {{"A", 8 * 3600 + i * gap}, {"B", 17 * 3600 + i * gap}, {"A", kDayEnd}},
        {K::home, K::work, K::home}));
  }
  w.plan_all(mode::car);
  return w;
}

std::map<std::size_t, int> onboard_peaks(event_log const& events,
                                         std::span<agent_plan const> plans,
                                         sim_network const& net) {
  std::vector<int> departs(plans.size(), 0);
  std::map<std::uint32_t, std::size_t> vehicle_of;
  std::map<std::size_t, int> load;
  std::map<std::size_t, int> peak;
  for (auto const& e : events) {
    switch (e.kind) {
      case event_kind::depart: ++departs[e.agent]; break;
      case event_kind::board: {
        auto const& tr = plans[e.agent].trips[static_cast<std::size_t>(
            departs[e.agent] - 1)];
        auto const& leg = *tr.transit;
        std::optional<std::size_t> vehicle;
        for (auto const& [t, trip] : net.departures(leg.pattern, leg.board_pos)) {
          if (t == e.t) {
            vehicle = trip;
          }
        }
        if (!vehicle) {
          throw std::runtime_error{"board event without a departing vehicle"};
        }
        vehicle_of[e.agent] = *vehicle;
        peak[*vehicle] = std::max(peak[*vehicle], ++load[*vehicle]);
        break;
      }
      case event_kind::alight: --load[vehicle_of.at(e.agent)]; break;
      default: break;
    }
  }
  return peak;
}

conservation check_conservation(event_log const& events,
                                iteration_stats const& stats,
                                std::size_t const link_count) {
  conservation c;
  std::vector<std::int64_t> on_link(link_count, 0);
  std::array<std::int64_t, kModeCount> departs{};
  std::array<std::int64_t, kModeCount> ends{};
  for (auto const& e : events) {
    auto const m = index_of(e.m);
    switch (e.kind) {
      case event_kind::enter_link: ++on_link[e.loc]; break;
      case event_kind::leave_link: --on_link[e.loc]; break;
      case event_kind::depart: ++departs[m]; break;
      case event_kind::arrive:
      case event_kind::stuck:
      case event_kind::denied_abort: ++ends[m]; break;
      default: break;
    }
  }
  for (std::size_t l = 0; l < link_count; ++l) {
    if (on_link[l] != 0) {
      c.links = false;
      c.detail += fmt::format("link {} ends with {} vehicles; ", l, on_link[l]);
    }
  }
  for (auto const m : kAllModes) {
    auto const i = index_of(m);
    if (departs[i] != ends[i]) {
      c.trips = false;
      c.detail += fmt::format("{}: {} departures, {} trip ends; ", to_string(m),
                              departs[i], ends[i]);
    }
    if (stats.planned[i] !=
        stats.arrived[i] + stats.stuck[i] + stats.denied_terminated[i]) {
      c.stats = false;
      c.detail += fmt::format("{}: planned {} != {} + {} + {}; ", to_string(m),
                              stats.planned[i], stats.arrived[i], stats.stuck[i],
                              stats.denied_terminated[i]);
    }
  }
  return c;
}

trip_context random_context(rng_t& rng, std::size_t const min_available) {
  trip_context ctx;
  do {
    ctx.available = {};
    for (auto const m : kAllModes) {
      if (uniform01(rng) < 0.7) {
        ctx.available.insert(m);
      }
    }
  } while (ctx.available.size() < min_available);
  for (auto const m : kAllModes) {
    ctx.time_h[index_of(m)] = 0.05 + 1.5 * uniform01(rng);
    ctx.cost[index_of(m)] = 8.0 * uniform01(rng);
  }
  return ctx;
}

mnl_params random_params(rng_t& rng) {
  mnl_params p;
  for (auto const m : kAllModes) {
    p.asc_of(m) = m == mode::car ? 0.0 : -3.0 + 6.0 * uniform01(rng);
  }
  p.beta_time = -4.0 * uniform01(rng);
  p.beta_cost = -0.5 * uniform01(rng);
  return p;
}

}  // namespace covsim::test
