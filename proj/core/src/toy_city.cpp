#include "covsim/toy_city.hpp"

#include "fmt/core.h"

namespace covsim::toy {

namespace {

std::string node_id(int row, int col) { return fmt::format("n{}{}", row, col); }

constexpr seconds_t kServiceStart = 5 * 3600;
constexpr seconds_t kServiceEnd = 23 * 3600 + 30 * 60;
constexpr seconds_t kRunTime = 150;
constexpr seconds_t kDwell = 20;

bool on_bus_line(int r0, int c0, int r1, int c1) {
  return (r0 == 1 && r1 == 1) || (c0 == 2 && c1 == 2);
}

}  // namespace

road_network road() {
  road_network net;
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      net.nodes.push_back({node_id(r, c), c * kSpacingM, r * kSpacingM});
    }
  }
  auto const index = [](int r, int c) {
    return static_cast<std::size_t>(r * kGridSize + c);
  };
  auto const add = [&](int r0, int c0, int r1, int c1) {
    road_link l;
    l.id = fmt::format("l_{}_{}", node_id(r0, c0), node_id(r1, c1));
    l.from = index(r0, c0);
    l.to = index(r1, c1);
    l.length_m = kSpacingM;
    l.capacity_vph = 900.0;
    l.freespeed_mps = 11.2;
    l.modes = on_bus_line(r0, c0, r1, c1) ? kLinkCar | kLinkBus : kLinkCar;
    net.links.push_back(std::move(l));
  };
  for (int r = 0; r < kGridSize; ++r) {
    for (int c = 0; c < kGridSize; ++c) {
      if (c + 1 < kGridSize) {
        add(r, c, r, c + 1);
        add(r, c + 1, r, c);
      }
      if (r + 1 < kGridSize) {
        add(r, c, r + 1, c);
        add(r + 1, c, r, c);
      }
    }
  }
  net.finalize();
  return net;
}

transit_schedule schedule(seconds_t const headway) {
  transit_schedule s;
  for (int c = 0; c < kGridSize; ++c) {
    s.stops.push_back({fmt::format("A{}", c), c * kSpacingM, 1 * kSpacingM,
                       node_id(1, c)});
  }
  for (int r = 0; r < kGridSize; ++r) {
    s.stops.push_back({fmt::format("B{}", r), 2 * kSpacingM, r * kSpacingM,
                       node_id(r, 2)});
  }
  s.routes.push_back({"A", 3, kVehicleCapacity});
  s.routes.push_back({"B", 3, kVehicleCapacity});

  auto const add_trips = [&](std::string const& route, std::size_t first_stop,
                             bool reverse) {
    auto const dir = reverse ? "r" : "f";
    int serial = 0;
    for (auto dep = kServiceStart; dep <= kServiceEnd; dep += headway) {
      transit_trip t;
      t.id = fmt::format("{}_{}_{:03}", route, dir, serial++);
      t.route_id = route;
      t.service_id = "weekday";
      for (int i = 0; i < kGridSize; ++i) {
        auto const pos = reverse ? kGridSize - 1 - i : i;
        stop_time st;
        st.stop = first_stop + static_cast<std::size_t>(pos);
        st.arrival = dep + i * (kRunTime + kDwell) - (i > 0 ? kDwell : 0);
        st.departure = dep + i * (kRunTime + kDwell);
        if (i == kGridSize - 1) {
          st.departure = st.arrival;
        }
        st.sequence = i + 1;
        t.stop_times.push_back(st);
      }
      s.trips.push_back(std::move(t));
    }
  };
  add_trips("A", 0, false);
  add_trips("A", 0, true);
  add_trips("B", kGridSize, false);
  add_trips("B", kGridSize, true);
  return s;
}

schedule_variants schedules() {
  schedule_variants v;
  v.add({"regular", schedule(kRegularHeadway)});
  v.add({"covid", schedule(kCovidHeadway)});
  return v;
}

covsim::population_spec pop_spec(int const agents_per_zone) {
  covsim::population_spec spec;
  for (int r = 0; r < kGridSize; ++r) {
    for (auto const half : {0, 1}) {
      zone_spec z;
      z.id = fmt::format("z{}{}", r, half == 0 ? 'w' : 'e');
      z.nodes = {node_id(r, 2 * half), node_id(r, 2 * half + 1)};
      z.agents = agents_per_zone;
      z.attraction = (r == 1 || r == 2) ? (half == 1 ? 3.0 : 2.0) : 1.0;
      spec.zones.push_back(std::move(z));
    }
  }
  spec.industries = {{"professional", 0.35, 0.80},
                     {"retail", 0.25, 0.16},
                     {"health", 0.20, 0.20},
                     {"education", 0.20, 0.40}};

  using K = activity_kind;
  auto const h = [](double hours) {
    return static_cast<seconds_t>(hours * 3600);
  };
  spec.templates = {
      {"commuter",
       0.45,
       {{K::home, h(7.75), h(1.0)}, {K::work, h(17.25), h(1.0)},
        {K::home, kDayEnd, 0}}},
      {"commuter_lunch",
       0.10,
       {{K::home, h(8.0), h(0.75)},
        {K::work, h(12.0), h(0.5)},
        {K::other, h(13.0), h(0.25)},
        {K::work, h(17.5), h(0.75)},
        {K::home, kDayEnd, 0}}},
      {"worker_evening_shop",
       0.10,
       {{K::home, h(8.0), h(0.75)},
        {K::work, h(17.0), h(0.75)},
        {K::home, h(18.75), h(0.5)},
        {K::shop, h(19.75), h(0.25)},
        {K::home, kDayEnd, 0}}},
      {"student",
       0.15,
       {{K::home, h(7.75), h(0.5)}, {K::school, h(15.0), h(0.75)},
        {K::home, kDayEnd, 0}}},
      {"non_worker",
       0.20,
       {{K::home, h(10.0), h(1.5)},
        {K::shop, h(11.5), h(0.5)},
        {K::home, h(14.5), h(1.0)},
        {K::other, h(16.5), h(0.75)},
        {K::home, kDayEnd, 0}}}};
  return spec;
}

return_schedule returns() { return return_schedule::uniform(0.25, 0.5, 0.75, 0.9); }

// Constants fitted with calibrate_ascs on the default toy assets (seed 7,
// 50 iterations): precovid to shares car 0.30, transit 0.35, walk 0.15,
// bike 0.10, ridehail 0.05, bikeshare 0.05; covid to transit 16 pp lower and
// car 6 pp higher than the precovid run.
mnl_params precovid_params() {
  mnl_params p;
  p.beta_time = -2.0;
  p.beta_cost = -0.3;
  p.asc_of(mode::car) = 0.0;
  p.asc_of(mode::transit) = 1.9279;
  p.asc_of(mode::walk) = -0.6719;
  p.asc_of(mode::bike) = -2.5752;
  p.asc_of(mode::ridehail) = 0.6384;
  p.asc_of(mode::bikeshare) = -1.0022;
  return p;
}

mnl_params covid_params() {
  auto p = precovid_params();
  p.asc_of(mode::transit) = 1.0480;
  p.asc_of(mode::walk) = -0.5679;
  p.asc_of(mode::bike) = -2.4712;
  p.asc_of(mode::bikeshare) = -0.8982;
  return p;
}

nested_params nested(double const mu) {
  nested_params n;
  n.base = precovid_params();
  n.nests = {{"transit", {mode::transit}, mu},
             {"auto", {mode::car, mode::ridehail}, mu},
             {"active", {mode::walk, mode::bike, mode::bikeshare}, mu}};
  return n;
}

sim_config sim(int const iterations) {
  sim_config c;
  c.iterations = iterations;
  return c;
}

scenario_assets assets(std::uint64_t const seed, int const agents_per_zone) {
  scenario_assets a;
  a.road = road();
  a.schedules = schedules();
  a.pop = generate_toy_population(pop_spec(agents_per_zone), seed);
  a.returns = returns();
  a.params["precovid_fit"] = precovid_params();
  a.params["covid_fit"] = covid_params();
  return a;
}

matrix_spec matrix(std::uint64_t const seed, int const iterations) {
  matrix_spec m;
  m.sim = sim(iterations);
  m.scenarios.push_back(scenario_config::make("precovid", phase::precovid, 1.0, seed));
  for (auto const p : {phase::covid, phase::p1, phase::p2, phase::p3, phase::p4}) {
    m.scenarios.push_back(
        scenario_config::make(std::string{to_string(p)}, p, 1.0, seed));
  }
  for (auto const p : {phase::covid, phase::p1, phase::p2, phase::p3, phase::p4}) {
    m.scenarios.push_back(scenario_config::make(
        fmt::format("s2_{}", to_string(p)), p, 0.5, seed));
  }
  return m;
}

}  // namespace covsim::toy
