#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "covsim/types.hpp"

namespace covsim {

// Bit set over the modes a road link admits.
enum link_mode_bits : std::uint8_t { kLinkCar = 1U, kLinkBus = 2U };

struct road_node {
  std::string id;
  double x{0.0};
  double y{0.0};

  bool operator==(road_node const&) const = default;
};

struct road_link {
  std::string id;
  std::size_t from{0};
  std::size_t to{0};
  double length_m{0.0};
  double capacity_vph{0.0};
  double freespeed_mps{0.0};
  std::uint8_t modes{kLinkCar};

  bool allows_car() const { return (modes & kLinkCar) != 0; }
  double free_flow_time() const { return length_m / freespeed_mps; }

  bool operator==(road_link const&) const = default;
};

struct road_network {
  std::vector<road_node> nodes;
  std::vector<road_link> links;

  // Rebuilds id lookups and adjacency; throws error on duplicate ids.
  void finalize();

  std::optional<std::size_t> find_node(std::string_view id) const;
  std::optional<std::size_t> find_link(std::string_view id) const;
  std::vector<std::size_t> const& out_links(std::size_t node) const {
    return out_links_[node];
  }

  bool operator==(road_network const& o) const {
    return nodes == o.nodes && links == o.links;
  }

private:
  std::unordered_map<std::string, std::size_t> node_index_;
  std::unordered_map<std::string, std::size_t> link_index_;
  std::vector<std::vector<std::size_t>> out_links_;
};

road_network load_road_network(std::filesystem::path const& nodes_file,
                               std::filesystem::path const& links_file);

void write_road_network(road_network const&,
                        std::filesystem::path const& nodes_file,
                        std::filesystem::path const& links_file);

struct transit_stop {
  std::string id;
  double x{0.0};
  double y{0.0};
  std::optional<std::string> node_id;

  bool operator==(transit_stop const&) const = default;
};

struct transit_route {
  std::string id;
  int route_type{3};
  int vehicle_capacity{100};

  bool operator==(transit_route const&) const = default;
};

struct stop_time {
  std::size_t stop{0};
  seconds_t arrival{0};
  seconds_t departure{0};
  int sequence{0};

  bool operator==(stop_time const&) const = default;
};

struct transit_trip {
  std::string id;
  std::string route_id;
  std::string service_id;
  std::vector<stop_time> stop_times;

  bool operator==(transit_trip const&) const = default;
};

struct transit_schedule {
  std::vector<transit_stop> stops;
  std::vector<transit_route> routes;
  std::vector<transit_trip> trips;

  std::optional<std::size_t> find_stop(std::string_view id) const;
  std::optional<std::size_t> find_route(std::string_view id) const;

  bool operator==(transit_schedule const&) const = default;
};

constexpr int kDefaultVehicleCapacity = 100;

struct gtfs_options {
  // stop_lat/stop_lon carry planar y/x meters. When false they are degrees
  // and get an equirectangular projection around the feed centroid.
  bool planar_coordinates{true};
  // YYYYMMDD; selects active service_ids when calendar.txt is present.
  std::optional<std::string> service_date;
  int default_vehicle_capacity{kDefaultVehicleCapacity};
};

transit_schedule load_gtfs_subset(std::filesystem::path const& feed_dir,
                                  gtfs_options const& opt = {},
                                  std::vector<std::string>* warnings = nullptr);

// Writes stops/routes/trips/stop_times plus the vehicle_capacity.csv sidecar.
void write_gtfs_subset(transit_schedule const&,
                       std::filesystem::path const& feed_dir);

std::optional<seconds_t> parse_gtfs_time(std::string_view);
std::string format_gtfs_time(seconds_t);

// A named schedule ("covid", "regular", ...).
struct schedule_variant {
  std::string label;
  transit_schedule schedule;
};

class schedule_variants {
public:
  // Re-adding a label is accepted only with an identical schedule.
  void add(schedule_variant v);
  transit_schedule const& get(std::string const& label) const;
  bool contains(std::string const& label) const {
    return variants_.contains(label);
  }
  std::vector<std::string> labels() const;

private:
  std::map<std::string, transit_schedule> variants_;
};

enum class finding_kind { invariant, unsnappable_stop };

struct finding {
  finding_kind kind;
  std::string subject;
  std::string message;
};

struct stop_snap {
  std::optional<std::size_t> node;
  double distance_m{0.0};
};

struct validation_report {
  std::vector<finding> findings;
  // Parallel to transit_schedule::stops.
  std::vector<stop_snap> snaps;

  bool ok() const { return findings.empty(); }
};

constexpr double kDefaultSnapRadius = 500.0;

std::vector<stop_snap> snap_stops(road_network const&, transit_schedule const&,
                                  double radius_m = kDefaultSnapRadius);

validation_report validate_network(road_network const&,
                                   transit_schedule const&,
                                   double snap_radius_m = kDefaultSnapRadius);

}  // namespace covsim
