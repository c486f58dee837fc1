#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "covsim/choice.hpp"
#include "covsim/engine.hpp"
#include "covsim/netio.hpp"
#include "covsim/population.hpp"

namespace covsim::test {

std::filesystem::path fixture(std::string_view rel);

// Directory removed on destruction.
class temp_dir {
public:
  temp_dir();
  ~temp_dir();
  temp_dir(temp_dir const&) = delete;
  temp_dir& operator=(temp_dir const&) = delete;

  std::filesystem::path const& path() const { return path_; }
  std::filesystem::path operator/(std::string_view rel) const {
    return path_ / rel;
  }

private:
  std::filesystem::path path_;
};

void write_text(std::filesystem::path const&, std::string_view);
std::string read_text(std::filesystem::path const&);

// Road network, schedule and population with plans ready for run_mobsim.
struct world {
  road_network road;
  transit_schedule schedule;
  population pop;
  sim_config cfg;
  std::unique_ptr<sim_network> net;
  std::vector<agent_plan> plans;

  void build_net() { net = std::make_unique<sim_network>(road, schedule, cfg); }
  // Routes every agent's agenda with one mode for all tours.
  void plan_all(mode);
};

// Stops H and W 2 km apart. Route "out" (capacity `capacity`) leaves H at
// 08:00 and then every 10 minutes for `vehicles` departures; route "back"
// (capacity 1000) leaves W at 17:00. Agents wait at H from 07:50 and ride
// transit both ways.
world boarding_world(int agents, int capacity, double factor, int vehicles = 1);

// Nodes A and B joined by a single 1000 m, 10 m/s car link AB (and BA);
// agent i leaves A at 08:00 + i * gap.
world car_world(int agents, seconds_t gap, double capacity_vph = 1800.0);

agent make_agent(std::string id, std::string const& zone,
                 std::vector<std::pair<std::string, seconds_t>> const& stops,
                 std::vector<activity_kind> const& kinds);

// Highest onboard count per transit trip, rebuilt from board and alight
// events and each agent's planned transit legs.
std::map<std::size_t, int> onboard_peaks(event_log const&,
                                         std::span<agent_plan const>,
                                         sim_network const&);

struct conservation {
  bool links{true};  // every enter_link matched by a leave_link
  bool trips{true};  // departures = arrivals + stuck + denied aborts per mode
  bool stats{true};  // planned = arrived + stuck + denied per mode
  std::string detail;

  bool ok() const { return links && trips && stats; }
};

conservation check_conservation(event_log const&, iteration_stats const&,
                                std::size_t link_count);

// Random trip context with `n` available modes drawn from all modes.
trip_context random_context(rng_t&, std::size_t min_available = 1);
mnl_params random_params(rng_t&);

}  // namespace covsim::test
