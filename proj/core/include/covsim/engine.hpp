#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covsim/choice.hpp"
#include "covsim/netio.hpp"
#include "covsim/population.hpp"

namespace covsim {

struct cost_model {
  double car_per_km{0.3};
  double car_fixed{2.0};  // parking, tolls
  double transit_fare{2.75};
  double ridehail_base{3.0};
  double ridehail_per_km{1.5};
  double bikeshare_fare{3.0};
};

struct sim_config {
  seconds_t timestep{1};
  int iterations{1};
  double replan_fraction{0.1};
  seconds_t travel_time_bin{900};
  double capacity_factor{1.0};
  // Score = perf * activity hours - travel * travel hours - penalty * denials
  // - stuck_penalty * stuck trips.
  double score_beta_perf{6.0};
  double score_beta_travel{6.0};
  double denied_boarding_penalty{2.0};
  // Charged once per stuck trip, including trips without a route.
  double stuck_penalty{6.0};

  seconds_t max_wait{3600};
  seconds_t stuck_time{600};
  seconds_t day_end{kDayEnd};
  seconds_t end_time{kMaxSimTime};

  double walk_speed_mps{1.34};
  double bike_speed_mps{4.0};
  seconds_t ridehail_wait{240};
  seconds_t bikeshare_access{120};
  double transit_max_access_m{1200.0};
  double snap_radius_m{kDefaultSnapRadius};
  double vehicle_length_m{7.5};

  mode_set modes{mode_set::all()};
  cost_model costs;
  int threads{1};

  // Throws error when an invariant is violated.
  void check() const;
};

// Trips of one route sharing an identical stop sequence.
struct transit_pattern {
  std::string route_id;
  std::vector<std::size_t> stops;
  std::vector<std::size_t> trips;  // ordered by first departure
  int vehicle_capacity{0};
};

// Precomputed routing structures over an immutable road network and
// transit schedule. Both must outlive this object.
class sim_network {
public:
  sim_network(road_network const&, transit_schedule const&, sim_config const&);

  road_network const& road() const { return *road_; }
  transit_schedule const& schedule() const { return *schedule_; }
  std::vector<transit_pattern> const& patterns() const { return patterns_; }
  std::size_t pattern_of_trip(std::size_t trip) const {
    return trip_pattern_[trip];
  }

  std::optional<std::size_t> stop_node(std::size_t stop) const {
    return snaps_[stop].node;
  }
  double stop_offset(std::size_t stop) const { return snaps_[stop].distance_m; }

  // Shortest distance over all links regardless of permitted modes; +inf
  // when unreachable.
  double walk_distance(std::size_t from, std::size_t to) const {
    return walk_dist_[from * road_->nodes.size() + to];
  }

  // Departures of a pattern at a stop position: (time, trip) ascending.
  std::vector<std::pair<seconds_t, std::size_t>> const& departures(
      std::size_t pattern, std::size_t pos) const {
    return departures_[pattern][pos];
  }

  // First scheduled departure at or after t, if any.
  std::optional<std::pair<seconds_t, std::size_t>> next_departure(
      std::size_t pattern, std::size_t pos, seconds_t t) const;

private:
  road_network const* road_;
  transit_schedule const* schedule_;
  std::vector<stop_snap> snaps_;
  std::vector<transit_pattern> patterns_;
  std::vector<std::size_t> trip_pattern_;
  std::vector<std::vector<std::vector<std::pair<seconds_t, std::size_t>>>>
      departures_;
  std::vector<double> walk_dist_;
};

// Observed link travel times and transit extra waits of one iteration,
// binned by entry time. Empty bins fall back to the schedule or free flow.
class travel_feedback {
public:
  travel_feedback() = default;
  travel_feedback(sim_network const&, seconds_t bin_size, seconds_t horizon);

  bool empty() const { return bin_size_ == 0; }

  // Expected traversal time of a link entered at t.
  double link_time(sim_network const&, std::size_t link, seconds_t t) const;
  // Mean wait beyond the scheduled one observed at a pattern stop near t.
  double extra_wait(std::size_t pattern, std::size_t pos, seconds_t t) const;

  void record_link(std::size_t link, seconds_t enter, seconds_t duration);
  void record_wait(std::size_t pattern, std::size_t pos, seconds_t arrival,
                   seconds_t extra);

private:
  struct cell {
    double sum{0.0};
    std::uint32_t n{0};
  };
  std::size_t bin(seconds_t t) const;

  seconds_t bin_size_{0};
  std::size_t bins_{0};
  std::vector<cell> links_;
  std::vector<std::size_t> pattern_offset_;
  std::vector<cell> waits_;
};

struct transit_leg {
  std::size_t pattern{0};
  std::size_t board_pos{0};
  std::size_t alight_pos{0};
  double access_m{0.0};
  double egress_m{0.0};

  bool operator==(transit_leg const&) const = default;
};

struct route_result {
  bool found{false};
  double duration_s{0.0};
  double distance_m{0.0};
  double cost{0.0};
  std::vector<std::size_t> links;  // car and ridehail
  std::optional<transit_leg> transit;
};

route_result route_trip(sim_network const&, sim_config const&, mode,
                        std::size_t origin, std::size_t dest, seconds_t depart,
                        travel_feedback const&);

struct trip_plan {
  std::size_t origin{0};
  std::size_t dest{0};
  seconds_t planned_departure{0};
  std::size_t tour{0};
  mode m{mode::walk};
  std::vector<std::size_t> links;
  double distance_m{0.0};
  std::optional<transit_leg> transit;
  double expected_s{0.0};
  bool routed{false};

  bool operator==(trip_plan const&) const = default;
};

struct agent_plan {
  std::size_t agent{0};  // index into the population
  std::vector<mode> tour_modes;
  std::vector<trip_plan> trips;

  bool operator==(agent_plan const&) const = default;
};

enum class event_kind : std::uint8_t {
  depart,
  enter_link,
  leave_link,
  board,
  alight,
  denied_boarding,
  arrive,
  stuck,
  // Trip ended after waiting max_wait with at least one denied boarding.
  denied_abort
};

enum class loc_kind : std::uint8_t { node, link, stop };

std::string_view to_string(event_kind);

struct event {
  seconds_t t{0};
  std::uint32_t agent{0};
  std::uint32_t loc{0};
  event_kind kind{event_kind::depart};
  loc_kind where{loc_kind::node};
  mode m{mode::walk};

  bool operator==(event const&) const = default;
};

using event_log = std::vector<event>;

// One JSON object per line: {"t","agent","kind","loc","mode"}.
void write_events_jsonl(std::ostream&, event_log const&, population const&,
                        sim_network const&);

using mode_counts = std::array<std::int64_t, kModeCount>;

struct iteration_stats {
  int iteration{0};
  double avg_score{0.0};
  mode_counts planned{};
  mode_counts arrived{};
  mode_counts stuck{};
  mode_counts denied_terminated{};
  std::int64_t denied_boardings{0};

  bool operator==(iteration_stats const&) const = default;
};

void write_stats_csv(std::ostream&, std::span<iteration_stats const>);

enum class trip_status : std::uint8_t { arrived, stuck, denied };

struct trip_outcome {
  trip_status status{trip_status::arrived};
  seconds_t depart{0};
  seconds_t end{0};
  int denied{0};
};

struct mobsim_result {
  event_log events;
  iteration_stats stats;
  // Parallel to the plans passed in.
  std::vector<std::vector<trip_outcome>> outcomes;
  travel_feedback feedback;
};

mobsim_result run_mobsim(std::span<agent_plan const>, population const&,
                         sim_network const&, sim_config const&);

// Scores for agents 0..agent_count-1 from an event log.
std::vector<double> score_plans(event_log const&, std::size_t agent_count,
                                sim_config const&);

// Trip and tour structure of an agenda. Throws if an activity node is not in
// the network.
std::vector<trip_plan> agenda_trips(agent const&, road_network const&);

trip_context tour_context(std::span<trip_plan const> trips, std::size_t tour,
                          sim_network const&, sim_config const&,
                          travel_feedback const&);

// Routes every trip of `plan` for its tour's mode.
void route_plan(agent_plan&, sim_network const&, sim_config const&,
                travel_feedback const&);

// Mode choice for every tour with free-flow contexts, then routing.
std::vector<agent_plan> make_initial_plans(population const&,
                                           sim_network const&,
                                           mnl_params const&,
                                           sim_config const&,
                                           std::uint64_t seed);

struct evolve_result {
  std::vector<agent_plan> plans;
  std::vector<iteration_stats> stats;
  event_log events;  // last iteration
  std::vector<double> scores;
  std::vector<std::vector<trip_outcome>> outcomes;
};

evolve_result evolve(population const&, sim_network const&, mnl_params const&,
                     sim_config const&, std::uint64_t seed,
                     std::vector<agent_plan> plans);

evolve_result evolve(population const&, sim_network const&, mnl_params const&,
                     sim_config const&, std::uint64_t seed);

}  // namespace covsim
