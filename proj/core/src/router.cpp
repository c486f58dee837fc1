#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <queue>

#include "fmt/core.h"

#include "covsim/engine.hpp"

namespace covsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void sim_config::check() const {
  if (timestep < 1) {
    throw error{"timestep must be >= 1 s"};
  }
  if (iterations < 1) {
    throw error{"iterations must be >= 1"};
  }
  if (!(replan_fraction > 0.0 && replan_fraction < 1.0)) {
    throw error{fmt::format("replan_fraction must be in (0, 1), got {}",
                            replan_fraction)};
  }
  if (!(capacity_factor > 0.0 && capacity_factor <= 1.0)) {
    throw error{fmt::format("capacity_factor must be in (0, 1], got {}",
                            capacity_factor)};
  }
  if (travel_time_bin < 1) {
    throw error{"travel_time_bin must be >= 1 s"};
  }
  if (!(walk_speed_mps > 0.0) || !(bike_speed_mps > 0.0)) {
    throw error{"walk and bike speeds must be positive"};
  }
  if (max_wait < 0 || stuck_time < 1 || end_time < day_end) {
    throw error{"invalid wait, stuck or end time"};
  }
  if (modes.empty()) {
    throw error{"no modes enabled"};
  }
  if (threads < 1) {
    throw error{"threads must be >= 1"};
  }
}

sim_network::sim_network(road_network const& road,
                         transit_schedule const& schedule,
                         sim_config const& cfg)
    : road_{&road}, schedule_{&schedule} {
  snaps_ = snap_stops(road, schedule, cfg.snap_radius_m);

  std::map<std::pair<std::string, std::vector<std::size_t>>, std::size_t>
      by_key;
  trip_pattern_.resize(schedule.trips.size());
  for (std::size_t t = 0; t < schedule.trips.size(); ++t) {
    auto const& trip = schedule.trips[t];
    std::vector<std::size_t> stops;
    stops.reserve(trip.stop_times.size());
    for (auto const& st : trip.stop_times) {
      stops.push_back(st.stop);
    }
    auto key = std::pair{trip.route_id, stops};
    auto it = by_key.find(key);
    if (it == end(by_key)) {
      transit_pattern p;
      p.route_id = trip.route_id;
      p.stops = std::move(stops);
      auto const r = schedule.find_route(trip.route_id);
      p.vehicle_capacity =
          r ? schedule.routes[*r].vehicle_capacity : kDefaultVehicleCapacity;
      it = by_key.emplace(std::move(key), patterns_.size()).first;
      patterns_.push_back(std::move(p));
    }
    patterns_[it->second].trips.push_back(t);
    trip_pattern_[t] = it->second;
  }

  departures_.resize(patterns_.size());
  for (std::size_t p = 0; p < patterns_.size(); ++p) {
    auto& pat = patterns_[p];
    std::stable_sort(begin(pat.trips), end(pat.trips),
                     [&](std::size_t a, std::size_t b) {
                       return schedule.trips[a].stop_times.front().departure <
                              schedule.trips[b].stop_times.front().departure;
                     });
    departures_[p].resize(pat.stops.size());
    for (auto const t : pat.trips) {
      auto const& sts = schedule.trips[t].stop_times;
      for (std::size_t pos = 0; pos < sts.size(); ++pos) {
        departures_[p][pos].emplace_back(sts[pos].departure, t);
      }
    }
    for (auto& d : departures_[p]) {
      std::sort(begin(d), end(d));
    }
  }

  // Pedestrians and cyclists may use every link in both directions.
  auto const n = road.nodes.size();
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(n);
  for (auto const& l : road.links) {
    adj[l.from].emplace_back(l.to, l.length_m);
    adj[l.to].emplace_back(l.from, l.length_m);
  }
  walk_dist_.assign(n * n, kInf);
  using item = std::pair<double, std::size_t>;
  for (std::size_t s = 0; s < n; ++s) {
    auto* const dist = &walk_dist_[s * n];
    std::priority_queue<item, std::vector<item>, std::greater<>> pq;
    dist[s] = 0.0;
    pq.emplace(0.0, s);
    while (!pq.empty()) {
      auto const [d, u] = pq.top();
      pq.pop();
      if (d > dist[u]) {
        continue;
      }
      for (auto const& [v, w] : adj[u]) {
        if (d + w < dist[v]) {
          dist[v] = d + w;
          pq.emplace(dist[v], v);
        }
      }
    }
  }
}

std::optional<std::pair<seconds_t, std::size_t>> sim_network::next_departure(
    std::size_t const pattern, std::size_t const pos, seconds_t const t) const {
  auto const& d = departures_[pattern][pos];
  auto const it = std::lower_bound(
      begin(d), end(d), std::pair<seconds_t, std::size_t>{t, 0});
  if (it == end(d)) {
    return std::nullopt;
  }
  return *it;
}

travel_feedback::travel_feedback(sim_network const& net,
                                 seconds_t const bin_size,
                                 seconds_t const horizon)
    : bin_size_{bin_size},
      bins_{static_cast<std::size_t>(horizon / bin_size) + 1} {
  links_.assign(net.road().links.size() * bins_, {});
  std::size_t offset = 0;
  for (auto const& p : net.patterns()) {
    pattern_offset_.push_back(offset);
    offset += p.stops.size() * bins_;
  }
  waits_.assign(offset, {});
}

std::size_t travel_feedback::bin(seconds_t const t) const {
  return std::min(bins_ - 1,
                  static_cast<std::size_t>(std::max(seconds_t{0}, t) /
                                           bin_size_));
}

double travel_feedback::link_time(sim_network const& net,
                                  std::size_t const link,
                                  seconds_t const t) const {
  if (!empty()) {
    auto const& c = links_[link * bins_ + bin(t)];
    if (c.n > 0) {
      return c.sum / c.n;
    }
  }
  return net.road().links[link].free_flow_time();
}

double travel_feedback::extra_wait(std::size_t const pattern,
                                   std::size_t const pos,
                                   seconds_t const t) const {
  if (empty()) {
    return 0.0;
  }
  auto const& c = waits_[pattern_offset_[pattern] + pos * bins_ + bin(t)];
  return c.n > 0 ? c.sum / c.n : 0.0;
}

void travel_feedback::record_link(std::size_t const link,
                                  seconds_t const enter,
                                  seconds_t const duration) {
  auto& c = links_[link * bins_ + bin(enter)];
  c.sum += duration;
  ++c.n;
}

void travel_feedback::record_wait(std::size_t const pattern,
                                  std::size_t const pos,
                                  seconds_t const arrival,
                                  seconds_t const extra) {
  auto& c = waits_[pattern_offset_[pattern] + pos * bins_ + bin(arrival)];
  c.sum += extra;
  ++c.n;
}

namespace {

// Time-dependent label-setting search over car links.
route_result route_car(sim_network const& net, std::size_t const origin,
                       std::size_t const dest, double const depart,
                       travel_feedback const& fb) {
  route_result r;
  auto const& road = net.road();
  if (origin == dest) {
    r.found = true;
    return r;
  }
  auto const n = road.nodes.size();
  std::vector<double> arrival(n, kInf);
  std::vector<std::size_t> via(n, std::numeric_limits<std::size_t>::max());
  using item = std::pair<double, std::size_t>;
  std::priority_queue<item, std::vector<item>, std::greater<>> pq;
  arrival[origin] = depart;
  pq.emplace(depart, origin);
  while (!pq.empty()) {
    auto const [t, u] = pq.top();
    pq.pop();
    if (t > arrival[u]) {
      continue;
    }
    if (u == dest) {
      break;
    }
    for (auto const l : road.out_links(u)) {
      auto const& link = road.links[l];
      if (!link.allows_car()) {
        continue;
      }
      auto const next =
          t + fb.link_time(net, l, static_cast<seconds_t>(std::floor(t)));
      if (next < arrival[link.to]) {
        arrival[link.to] = next;
        via[link.to] = l;
        pq.emplace(next, link.to);
      }
    }
  }
  if (arrival[dest] == kInf) {
    return r;
  }
  for (auto v = dest; v != origin;) {
    auto const l = via[v];
    r.links.push_back(l);
    r.distance_m += road.links[l].length_m;
    v = road.links[l].from;
  }
  std::reverse(begin(r.links), end(r.links));
  r.found = true;
  r.duration_s = arrival[dest] - depart;
  return r;
}

route_result route_transit(sim_network const& net, sim_config const& cfg,
                           std::size_t const origin, std::size_t const dest,
                           seconds_t const depart, travel_feedback const& fb) {
  route_result best;
  auto best_time = kInf;
  auto const& sched = net.schedule();
  for (std::size_t p = 0; p < net.patterns().size(); ++p) {
    auto const& pat = net.patterns()[p];
    for (std::size_t i = 0; i + 1 < pat.stops.size(); ++i) {
      auto const board_node = net.stop_node(pat.stops[i]);
      if (!board_node) {
        continue;
      }
      auto const access = net.walk_distance(origin, *board_node) +
                          net.stop_offset(pat.stops[i]);
      if (!(access <= cfg.transit_max_access_m)) {
        continue;
      }
      auto const at_stop =
          depart + static_cast<seconds_t>(std::lround(access / cfg.walk_speed_mps));
      auto const dep = net.next_departure(p, i, at_stop);
      if (!dep) {
        continue;
      }
      auto const wait = static_cast<double>(dep->first - at_stop) +
                        fb.extra_wait(p, i, at_stop);
      auto const& sts = sched.trips[dep->second].stop_times;
      for (std::size_t j = i + 1; j < pat.stops.size(); ++j) {
        auto const alight_node = net.stop_node(pat.stops[j]);
        if (!alight_node) {
          continue;
        }
        auto const egress = net.walk_distance(*alight_node, dest) +
                            net.stop_offset(pat.stops[j]);
        if (!(egress <= cfg.transit_max_access_m)) {
          continue;
        }
        auto const total = access / cfg.walk_speed_mps + wait +
                           static_cast<double>(sts[j].arrival - sts[i].departure) +
                           egress / cfg.walk_speed_mps;
        if (total < best_time) {
          best_time = total;
          best.found = true;
          best.duration_s = total;
          best.distance_m = access + egress;
          best.transit = transit_leg{p, i, j, access, egress};
        }
      }
    }
  }
  return best;
}

}  // namespace

route_result route_trip(sim_network const& net, sim_config const& cfg,
                        mode const m, std::size_t const origin,
                        std::size_t const dest, seconds_t const depart,
                        travel_feedback const& fb) {
  auto const n = net.road().nodes.size();
  if (origin >= n || dest >= n) {
    throw error{"route_trip: node index out of range"};
  }
  auto const& c = cfg.costs;
  route_result r;
  switch (m) {
    case mode::car:
      r = route_car(net, origin, dest, depart, fb);
      r.cost = c.car_fixed + c.car_per_km * r.distance_m / 1000.0;
      break;
    case mode::ridehail:
      r = route_car(net, origin, dest, depart + cfg.ridehail_wait, fb);
      r.duration_s += cfg.ridehail_wait;
      r.cost = c.ridehail_base + c.ridehail_per_km * r.distance_m / 1000.0;
      break;
    case mode::walk:
    case mode::bike:
    case mode::bikeshare: {
      auto const d = net.walk_distance(origin, dest);
      if (d == kInf) {
        return r;
      }
      r.found = true;
      r.distance_m = d;
      r.duration_s =
          d / (m == mode::walk ? cfg.walk_speed_mps : cfg.bike_speed_mps);
      if (m == mode::bikeshare) {
        r.duration_s += cfg.bikeshare_access;
        r.cost = c.bikeshare_fare;
      }
      break;
    }
    case mode::transit:
      r = route_transit(net, cfg, origin, dest, depart, fb);
      r.cost = c.transit_fare;
      break;
  }
  return r;
}

std::vector<trip_plan> agenda_trips(agent const& a, road_network const& road) {
  std::vector<trip_plan> trips;
  if (a.agenda.size() < 2) {
    return trips;
  }
  auto node_of = [&](activity const& act) {
    auto const n = road.find_node(act.node);
    if (!n) {
      throw error{fmt::format("agent '{}': activity node '{}' not in network",
                              a.id, act.node)};
    }
    return *n;
  };
  std::size_t tour = 0;
  for (std::size_t i = 0; i + 1 < a.agenda.size(); ++i) {
    if (i > 0 && a.agenda[i].kind == activity_kind::home) {
      ++tour;
    }
    trip_plan t;
    t.origin = node_of(a.agenda[i]);
    t.dest = node_of(a.agenda[i + 1]);
    t.planned_departure = a.agenda[i].end_time;
    t.tour = tour;
    trips.push_back(std::move(t));
  }
  return trips;
}

trip_context tour_context(std::span<trip_plan const> trips,
                          std::size_t const tour, sim_network const& net,
                          sim_config const& cfg, travel_feedback const& fb) {
  trip_context ctx;
  for (auto const m : kAllModes) {
    if (!cfg.modes.contains(m)) {
      continue;
    }
    auto const i = index_of(m);
    bool ok = true;
    bool any = false;
    for (auto const& t : trips) {
      if (t.tour != tour) {
        continue;
      }
      any = true;
      auto const r =
          route_trip(net, cfg, m, t.origin, t.dest, t.planned_departure, fb);
      if (!r.found) {
        ok = false;
        break;
      }
      ctx.time_h[i] += r.duration_s / 3600.0;
      ctx.cost[i] += r.cost;
    }
    if (ok && any) {
      ctx.available.insert(m);
    } else {
      ctx.time_h[i] = 0.0;
      ctx.cost[i] = 0.0;
    }
  }
  return ctx;
}

void route_plan(agent_plan& plan, sim_network const& net, sim_config const& cfg,
                travel_feedback const& fb) {
  for (auto& t : plan.trips) {
    t.m = plan.tour_modes.at(t.tour);
    auto r = route_trip(net, cfg, t.m, t.origin, t.dest, t.planned_departure,
                        fb);
    t.routed = r.found;
    t.links = std::move(r.links);
    t.distance_m = r.distance_m;
    t.transit = r.transit;
    t.expected_s = r.duration_s;
  }
}

}  // namespace covsim
