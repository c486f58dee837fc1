#include "covsim/netio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <unordered_set>

#include "fmt/core.h"

#include "covsim/csv.hpp"

namespace fs = std::filesystem;

namespace covsim {

void road_network::finalize() {
  node_index_.clear();
  link_index_.clear();
  out_links_.assign(nodes.size(), {});
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!node_index_.emplace(nodes[i].id, i).second) {
      throw error{fmt::format("duplicate node id '{}'", nodes[i].id)};
    }
  }
  for (std::size_t i = 0; i < links.size(); ++i) {
    auto const& l = links[i];
    if (!link_index_.emplace(l.id, i).second) {
      throw error{fmt::format("duplicate link id '{}'", l.id)};
    }
    if (l.from >= nodes.size() || l.to >= nodes.size()) {
      throw error{fmt::format("link '{}' references a missing node", l.id)};
    }
    out_links_[l.from].push_back(i);
  }
}

std::optional<std::size_t> road_network::find_node(
    std::string_view const id) const {
  auto const it = node_index_.find(std::string{id});
  return it == end(node_index_) ? std::nullopt
                                : std::optional<std::size_t>{it->second};
}

std::optional<std::size_t> road_network::find_link(
    std::string_view const id) const {
  auto const it = link_index_.find(std::string{id});
  return it == end(link_index_) ? std::nullopt
                                : std::optional<std::size_t>{it->second};
}

namespace {

std::uint8_t parse_link_modes(csv_table const& t, csv_table::row const& r,
                              std::size_t const col) {
  auto const& s = t.str(r, col);
  std::uint8_t bits = 0;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto const bar = s.find('|', start);
    auto const tok = std::string_view{s}.substr(
        start, bar == std::string::npos ? std::string::npos : bar - start);
    if (tok == "car") {
      bits |= kLinkCar;
    } else if (tok == "bus") {
      bits |= kLinkBus;
    } else {
      throw parse_error{t.source(), r.line,
                        fmt::format("unknown link mode '{}'", tok)};
    }
    if (bar == std::string::npos) {
      break;
    }
    start = bar + 1;
  }
  return bits;
}

std::string format_link_modes(std::uint8_t const bits) {
  std::string out;
  if ((bits & kLinkCar) != 0) {
    out = "car";
  }
  if ((bits & kLinkBus) != 0) {
    out += out.empty() ? "bus" : "|bus";
  }
  return out;
}

void require_file(fs::path const& p) {
  if (!fs::exists(p)) {
    throw parse_error{p.string(), "required file missing"};
  }
}

}  // namespace

road_network load_road_network(fs::path const& nodes_file,
                               fs::path const& links_file) {
  require_file(nodes_file);
  require_file(links_file);

  road_network net;
  std::unordered_map<std::string, std::size_t> ids;

  auto const nodes = csv_table::read(nodes_file);
  auto const c_id = nodes.column("node_id");
  auto const c_x = nodes.column("x");
  auto const c_y = nodes.column("y");
  for (auto const& r : nodes.rows()) {
    auto n = road_node{nodes.str(r, c_id), nodes.number(r, c_x),
                       nodes.number(r, c_y)};
    if (n.id.empty()) {
      throw parse_error{nodes.source(), r.line, "empty node_id"};
    }
    if (!ids.emplace(n.id, net.nodes.size()).second) {
      throw parse_error{nodes.source(), r.line,
                        fmt::format("duplicate node_id '{}'", n.id)};
    }
    net.nodes.push_back(std::move(n));
  }

  auto const links = csv_table::read(links_file);
  auto const l_id = links.column("link_id");
  auto const l_from = links.column("from_node");
  auto const l_to = links.column("to_node");
  auto const l_len = links.column("length_m");
  auto const l_cap = links.column("capacity_vph");
  auto const l_speed = links.column("freespeed_mps");
  auto const l_modes = links.column("modes");
  std::unordered_set<std::string> link_ids;
  for (auto const& r : links.rows()) {
    auto const& id = links.str(r, l_id);
    if (id.empty()) {
      throw parse_error{links.source(), r.line, "empty link_id"};
    }
    if (!link_ids.insert(id).second) {
      throw parse_error{links.source(), r.line,
                        fmt::format("duplicate link_id '{}'", id)};
    }
    auto const resolve = [&](std::size_t const col) {
      auto const& ref = links.str(r, col);
      auto const it = ids.find(ref);
      if (it == end(ids)) {
        throw parse_error{
            links.source(), r.line,
            fmt::format("link '{}' references unknown node '{}'", id, ref)};
      }
      return it->second;
    };
    road_link l;
    l.id = id;
    l.from = resolve(l_from);
    l.to = resolve(l_to);
    l.length_m = links.number(r, l_len);
    l.capacity_vph = links.number(r, l_cap);
    l.freespeed_mps = links.number(r, l_speed);
    l.modes = parse_link_modes(links, r, l_modes);
    auto const positive = [&](double const v, char const* what) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw parse_error{
            links.source(), r.line,
            fmt::format("link '{}': {} must be positive, got {}", id, what, v)};
      }
    };
    positive(l.length_m, "length_m");
    positive(l.capacity_vph, "capacity_vph");
    positive(l.freespeed_mps, "freespeed_mps");
    net.links.push_back(std::move(l));
  }

  net.finalize();
  return net;
}

void write_road_network(road_network const& net, fs::path const& nodes_file,
                        fs::path const& links_file) {
  {
    std::ofstream out{nodes_file, std::ios::binary};
    if (!out) {
      throw error{fmt::format("cannot write {}", nodes_file.string())};
    }
    out << "node_id,x,y\n";
    for (auto const& n : net.nodes) {
      out << csv_escape(n.id) << ',' << format_double(n.x) << ','
          << format_double(n.y) << '\n';
    }
  }
  std::ofstream out{links_file, std::ios::binary};
  if (!out) {
    throw error{fmt::format("cannot write {}", links_file.string())};
  }
  out << "link_id,from_node,to_node,length_m,capacity_vph,freespeed_mps,modes\n";
  for (auto const& l : net.links) {
    out << csv_escape(l.id) << ',' << csv_escape(net.nodes[l.from].id) << ','
        << csv_escape(net.nodes[l.to].id) << ',' << format_double(l.length_m)
        << ',' << format_double(l.capacity_vph) << ','
        << format_double(l.freespeed_mps) << ',' << format_link_modes(l.modes)
        << '\n';
  }
}

std::optional<std::size_t> transit_schedule::find_stop(
    std::string_view const id) const {
  for (std::size_t i = 0; i < stops.size(); ++i) {
    if (stops[i].id == id) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> transit_schedule::find_route(
    std::string_view const id) const {
  for (std::size_t i = 0; i < routes.size(); ++i) {
    if (routes[i].id == id) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<seconds_t> parse_gtfs_time(std::string_view s) {
  while (!s.empty() && s.front() == ' ') {
    s.remove_prefix(1);
  }
  int parts[3] = {0, 0, 0};
  int idx = 0;
  int digits = 0;
  for (char const c : s) {
    if (c == ':') {
      if (digits == 0 || ++idx > 2) {
        return std::nullopt;
      }
      digits = 0;
    } else if (c >= '0' && c <= '9') {
      parts[idx] = parts[idx] * 10 + (c - '0');
      if (++digits > 2) {
        return std::nullopt;
      }
    } else {
      return std::nullopt;
    }
  }
  if (idx != 2 || digits == 0 || parts[1] > 59 || parts[2] > 59) {
    return std::nullopt;
  }
  auto const t = parts[0] * 3600 + parts[1] * 60 + parts[2];
  if (t > kMaxSimTime) {
    return std::nullopt;
  }
  return t;
}

std::string format_gtfs_time(seconds_t const t) {
  return fmt::format("{:02}:{:02}:{:02}", t / 3600, (t / 60) % 60, t % 60);
}

namespace {

// Service ids active on a YYYYMMDD date per calendar.txt.
std::set<std::string> active_services(csv_table const& cal,
                                      std::string const& date) {
  using namespace std::chrono;
  auto bad_date = [&]() {
    return error{fmt::format("invalid service date '{}'", date)};
  };
  if (date.size() != 8 ||
      !std::all_of(begin(date), end(date),
                   [](char c) { return c >= '0' && c <= '9'; })) {
    throw bad_date();
  }
  auto const ymd = year_month_day{year{std::stoi(date.substr(0, 4))},
                                  month{static_cast<unsigned>(
                                      std::stoi(date.substr(4, 2)))},
                                  day{static_cast<unsigned>(
                                      std::stoi(date.substr(6, 2)))}};
  if (!ymd.ok()) {
    throw bad_date();
  }
  auto const wd = weekday{sys_days{ymd}}.c_encoding();  // 0 = Sunday
  static constexpr char const* kDays[] = {"sunday",   "monday", "tuesday",
                                          "wednesday", "thursday", "friday",
                                          "saturday"};
  auto const c_id = cal.column("service_id");
  auto const c_day = cal.column(kDays[wd]);
  auto const c_start = cal.column("start_date");
  auto const c_end = cal.column("end_date");
  std::set<std::string> out;
  for (auto const& r : cal.rows()) {
    if (cal.str(r, c_day) == "1" && cal.str(r, c_start) <= date &&
        date <= cal.str(r, c_end)) {
      out.insert(cal.str(r, c_id));
    }
  }
  return out;
}

}  // namespace

transit_schedule load_gtfs_subset(fs::path const& dir, gtfs_options const& opt,
                                  std::vector<std::string>* warnings) {
  auto warn = [&](std::string msg) {
    if (warnings != nullptr) {
      warnings->push_back(std::move(msg));
    }
  };
  for (auto const* const f :
       {"stops.txt", "routes.txt", "trips.txt", "stop_times.txt"}) {
    require_file(dir / f);
  }
  for (auto const* const f : {"frequencies.txt", "transfers.txt", "shapes.txt",
                              "calendar_dates.txt"}) {
    if (fs::exists(dir / f)) {
      warn(fmt::format("{} ignored", f));
    }
  }

  transit_schedule s;

  auto const stops = csv_table::read(dir / "stops.txt");
  {
    auto const c_id = stops.column("stop_id");
    auto const c_lat = stops.column("stop_lat");
    auto const c_lon = stops.column("stop_lon");
    auto const c_node = stops.find_column("node_id");
    std::unordered_set<std::string> seen;
    for (auto const& r : stops.rows()) {
      transit_stop st;
      st.id = stops.str(r, c_id);
      if (!seen.insert(st.id).second) {
        throw parse_error{stops.source(), r.line,
                          fmt::format("duplicate stop_id '{}'", st.id)};
      }
      st.y = stops.number(r, c_lat);
      st.x = stops.number(r, c_lon);
      if (c_node && !stops.str(r, *c_node).empty()) {
        st.node_id = stops.str(r, *c_node);
      }
      s.stops.push_back(std::move(st));
    }
    if (!opt.planar_coordinates && !s.stops.empty()) {
      constexpr double kEarthRadius = 6371000.0;
      double lat0 = 0.0;
      double lon0 = 0.0;
      for (auto const& st : s.stops) {
        lat0 += st.y;
        lon0 += st.x;
      }
      lat0 /= static_cast<double>(s.stops.size());
      lon0 /= static_cast<double>(s.stops.size());
      auto const k = std::numbers::pi / 180.0;
      for (auto& st : s.stops) {
        auto const lat = st.y;
        auto const lon = st.x;
        st.x = kEarthRadius * (lon - lon0) * k * std::cos(lat0 * k);
        st.y = kEarthRadius * (lat - lat0) * k;
      }
    }
  }

  std::map<std::string, int> capacities;
  if (auto const sidecar = dir / "vehicle_capacity.csv"; fs::exists(sidecar)) {
    auto const t = csv_table::read(sidecar);
    auto const c_route = t.column("route_id");
    auto const c_cap = t.column("capacity");
    for (auto const& r : t.rows()) {
      auto const cap = t.integer(r, c_cap);
      if (cap <= 0) {
        throw parse_error{t.source(), r.line, "capacity must be positive"};
      }
      capacities[t.str(r, c_route)] = static_cast<int>(cap);
    }
  }

  auto const routes = csv_table::read(dir / "routes.txt");
  {
    auto const c_id = routes.column("route_id");
    auto const c_type = routes.column("route_type");
    for (auto const& r : routes.rows()) {
      transit_route rt;
      rt.id = routes.str(r, c_id);
      if (s.find_route(rt.id)) {
        throw parse_error{routes.source(), r.line,
                          fmt::format("duplicate route_id '{}'", rt.id)};
      }
      rt.route_type = static_cast<int>(routes.integer(r, c_type));
      auto const cap = capacities.find(rt.id);
      rt.vehicle_capacity =
          cap == end(capacities) ? opt.default_vehicle_capacity : cap->second;
      s.routes.push_back(std::move(rt));
    }
  }

  std::optional<std::set<std::string>> active;
  if (auto const cal = dir / "calendar.txt"; fs::exists(cal)) {
    if (opt.service_date) {
      active = active_services(csv_table::read(cal), *opt.service_date);
    } else {
      warn("calendar.txt present but no service date configured; loading all "
           "services");
    }
  }

  auto const trips = csv_table::read(dir / "trips.txt");
  std::unordered_map<std::string, std::size_t> trip_index;
  {
    auto const c_route = trips.column("route_id");
    auto const c_service = trips.column("service_id");
    auto const c_trip = trips.column("trip_id");
    for (auto const& r : trips.rows()) {
      transit_trip tr;
      tr.id = trips.str(r, c_trip);
      tr.route_id = trips.str(r, c_route);
      tr.service_id = trips.str(r, c_service);
      if (!s.find_route(tr.route_id)) {
        throw parse_error{trips.source(), r.line,
                          fmt::format("trip '{}' references unknown route '{}'",
                                      tr.id, tr.route_id)};
      }
      if (trip_index.contains(tr.id)) {
        throw parse_error{trips.source(), r.line,
                          fmt::format("duplicate trip_id '{}'", tr.id)};
      }
      if (active && !active->contains(tr.service_id)) {
        continue;
      }
      trip_index.emplace(tr.id, s.trips.size());
      s.trips.push_back(std::move(tr));
    }
  }

  auto const st = csv_table::read(dir / "stop_times.txt");
  {
    auto const c_trip = st.column("trip_id");
    auto const c_arr = st.column("arrival_time");
    auto const c_dep = st.column("departure_time");
    auto const c_stop = st.column("stop_id");
    auto const c_seq = st.column("stop_sequence");

    std::unordered_map<std::string, std::size_t> stop_index;
    for (std::size_t i = 0; i < s.stops.size(); ++i) {
      stop_index.emplace(s.stops[i].id, i);
    }
    // Line of each stop_time, for error messages after sorting.
    std::vector<std::vector<std::size_t>> lines(s.trips.size());
    for (auto const& r : st.rows()) {
      auto const& trip_id = st.str(r, c_trip);
      auto const it = trip_index.find(trip_id);
      if (it == end(trip_index)) {
        // Inactive service, or a trip absent from trips.txt.
        continue;
      }
      auto const stop = stop_index.find(st.str(r, c_stop));
      if (stop == end(stop_index)) {
        throw parse_error{st.source(), r.line,
                          fmt::format("unknown stop_id '{}'", st.str(r, c_stop))};
      }
      auto const arr = parse_gtfs_time(st.str(r, c_arr));
      auto const dep = parse_gtfs_time(st.str(r, c_dep));
      if (!arr || !dep) {
        throw parse_error{st.source(), r.line,
                          "arrival_time/departure_time must be HH:MM:SS "
                          "within 0-30 h"};
      }
      auto& trip = s.trips[it->second];
      trip.stop_times.push_back(
          stop_time{stop->second, *arr, *dep,
                    static_cast<int>(st.integer(r, c_seq))});
      lines[it->second].push_back(r.line);
    }

    for (std::size_t t = 0; t < s.trips.size(); ++t) {
      auto& trip = s.trips[t];
      std::vector<std::size_t> order(trip.stop_times.size());
      for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
      }
      std::sort(begin(order), end(order), [&](std::size_t a, std::size_t b) {
        return trip.stop_times[a].sequence < trip.stop_times[b].sequence;
      });
      std::vector<stop_time> sorted;
      std::vector<std::size_t> sorted_lines;
      sorted.reserve(order.size());
      for (auto const i : order) {
        sorted.push_back(trip.stop_times[i]);
        sorted_lines.push_back(lines[t][i]);
      }
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (sorted[i].departure < sorted[i].arrival) {
          throw parse_error{st.source(), sorted_lines[i],
                            fmt::format("trip '{}': departure before arrival",
                                        trip.id)};
        }
        if (i == 0) {
          continue;
        }
        if (sorted[i].sequence == sorted[i - 1].sequence) {
          throw parse_error{st.source(), sorted_lines[i],
                            fmt::format("trip '{}': duplicate stop_sequence {}",
                                        trip.id, sorted[i].sequence)};
        }
        if (sorted[i].arrival <= sorted[i - 1].departure) {
          throw parse_error{
              st.source(), sorted_lines[i],
              fmt::format("trip '{}': non-increasing stop time at sequence {} "
                          "({} after {})",
                          trip.id, sorted[i].sequence,
                          format_gtfs_time(sorted[i].arrival),
                          format_gtfs_time(sorted[i - 1].departure))};
        }
      }
      trip.stop_times = std::move(sorted);
    }
  }

  auto const before = s.trips.size();
  std::erase_if(s.trips,
                [](transit_trip const& t) { return t.stop_times.size() < 2; });
  if (s.trips.size() != before) {
    warn(fmt::format("{} trip(s) with fewer than two stop times dropped",
                     before - s.trips.size()));
  }
  if (st.rows().empty()) {
    warn("stop_times.txt is empty; schedule has no trips");
  }
  return s;
}

void write_gtfs_subset(transit_schedule const& s, fs::path const& dir) {
  fs::create_directories(dir);
  auto open = [&](char const* name) {
    std::ofstream out{dir / name, std::ios::binary};
    if (!out) {
      throw error{fmt::format("cannot write {}", (dir / name).string())};
    }
    return out;
  };
  {
    auto const with_nodes = std::any_of(
        begin(s.stops), end(s.stops),
        [](transit_stop const& st) { return st.node_id.has_value(); });
    auto out = open("stops.txt");
    out << "stop_id,stop_lat,stop_lon" << (with_nodes ? ",node_id" : "")
        << '\n';
    for (auto const& st : s.stops) {
      out << csv_escape(st.id) << ',' << format_double(st.y) << ','
          << format_double(st.x);
      if (with_nodes) {
        out << ',' << csv_escape(st.node_id.value_or(""));
      }
      out << '\n';
    }
  }
  {
    auto out = open("routes.txt");
    out << "route_id,route_type\n";
    for (auto const& r : s.routes) {
      out << csv_escape(r.id) << ',' << r.route_type << '\n';
    }
  }
  {
    auto out = open("vehicle_capacity.csv");
    out << "route_id,capacity\n";
    for (auto const& r : s.routes) {
      out << csv_escape(r.id) << ',' << r.vehicle_capacity << '\n';
    }
  }
  {
    auto out = open("trips.txt");
    out << "route_id,service_id,trip_id\n";
    for (auto const& t : s.trips) {
      out << csv_escape(t.route_id) << ',' << csv_escape(t.service_id) << ','
          << csv_escape(t.id) << '\n';
    }
  }
  auto out = open("stop_times.txt");
  out << "trip_id,arrival_time,departure_time,stop_id,stop_sequence\n";
  for (auto const& t : s.trips) {
    for (auto const& x : t.stop_times) {
      out << csv_escape(t.id) << ',' << format_gtfs_time(x.arrival) << ','
          << format_gtfs_time(x.departure) << ','
          << csv_escape(s.stops[x.stop].id) << ',' << x.sequence << '\n';
    }
  }
}

void schedule_variants::add(schedule_variant v) {
  if (v.label.empty()) {
    throw error{"schedule variant label must be nonempty"};
  }
  auto const it = variants_.find(v.label);
  if (it != end(variants_)) {
    if (!(it->second == v.schedule)) {
      throw error{fmt::format(
          "schedule variant '{}' already registered with a different schedule",
          v.label)};
    }
    return;
  }
  variants_.emplace(std::move(v.label), std::move(v.schedule));
}

transit_schedule const& schedule_variants::get(std::string const& label) const {
  auto const it = variants_.find(label);
  if (it == end(variants_)) {
    throw error{fmt::format("unknown schedule variant '{}'", label)};
  }
  return it->second;
}

std::vector<std::string> schedule_variants::labels() const {
  std::vector<std::string> out;
  for (auto const& [k, v] : variants_) {
    out.push_back(k);
  }
  return out;
}

std::vector<stop_snap> snap_stops(road_network const& road,
                                  transit_schedule const& transit,
                                  double const radius_m) {
  std::vector<stop_snap> snaps;
  snaps.reserve(transit.stops.size());
  for (auto const& st : transit.stops) {
    stop_snap snap;
    if (st.node_id) {
      for (std::size_t i = 0; i < road.nodes.size(); ++i) {
        if (road.nodes[i].id == *st.node_id) {
          snap.node = i;
          break;
        }
      }
      snaps.push_back(snap);
      continue;
    }
    auto best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> best_node;
    for (std::size_t i = 0; i < road.nodes.size(); ++i) {
      auto const d =
          std::hypot(road.nodes[i].x - st.x, road.nodes[i].y - st.y);
      if (d < best) {
        best = d;
        best_node = i;
      }
    }
    snap.distance_m = best_node ? best : 0.0;
    if (best_node && best <= radius_m) {
      snap.node = best_node;
    }
    snaps.push_back(snap);
  }
  return snaps;
}

validation_report validate_network(road_network const& road,
                                   transit_schedule const& transit,
                                   double const snap_radius_m) {
  validation_report rep;
  auto invariant = [&](std::string subject, std::string msg) {
    rep.findings.push_back(
        finding{finding_kind::invariant, std::move(subject), std::move(msg)});
  };

  std::unordered_set<std::string> node_ids;
  for (auto const& n : road.nodes) {
    if (!node_ids.insert(n.id).second) {
      invariant(n.id, "duplicate node id");
    }
  }
  std::unordered_set<std::string> link_ids;
  for (auto const& l : road.links) {
    if (!link_ids.insert(l.id).second) {
      invariant(l.id, "duplicate link id");
    }
    if (l.from >= road.nodes.size() || l.to >= road.nodes.size()) {
      invariant(l.id, "dangling node reference");
    }
    if (!(l.length_m > 0.0)) {
      invariant(l.id, "non-positive length");
    }
    if (!(l.capacity_vph > 0.0)) {
      invariant(l.id, "non-positive capacity");
    }
    if (!(l.freespeed_mps > 0.0)) {
      invariant(l.id, "non-positive freespeed");
    }
  }

  std::unordered_set<std::string> route_ids;
  for (auto const& r : transit.routes) {
    route_ids.insert(r.id);
    if (r.vehicle_capacity <= 0) {
      invariant(r.id, "non-positive vehicle capacity");
    }
  }
  for (auto const& t : transit.trips) {
    if (!route_ids.contains(t.route_id)) {
      invariant(t.id, fmt::format("unknown route '{}'", t.route_id));
    }
    for (std::size_t i = 0; i < t.stop_times.size(); ++i) {
      if (t.stop_times[i].stop >= transit.stops.size()) {
        invariant(t.id, "unknown stop reference");
      }
      if (i > 0 && t.stop_times[i].arrival <= t.stop_times[i - 1].departure) {
        invariant(t.id, "non-increasing stop times");
      }
    }
  }

  rep.snaps = snap_stops(road, transit, snap_radius_m);
  for (std::size_t i = 0; i < transit.stops.size(); ++i) {
    auto const& st = transit.stops[i];
    auto const& snap = rep.snaps[i];
    if (snap.node) {
      continue;
    }
    if (st.node_id) {
      invariant(st.id, fmt::format("stop references unknown node '{}'",
                                   *st.node_id));
    } else {
      rep.findings.push_back(finding{
          finding_kind::unsnappable_stop, st.id,
          fmt::format("unsnappable stop: nearest node {:.1f} m away (radius "
                      "{:.1f} m)",
                      snap.distance_m, snap_radius_m)});
    }
  }
  return rep;
}

}  // namespace covsim
