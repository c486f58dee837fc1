#pragma once

#include <cstdint>

#include "covsim/choice.hpp"
#include "covsim/netio.hpp"
#include "covsim/population.hpp"
#include "covsim/scenario.hpp"

namespace covsim {

// Desk-scale test city: a 4x4 grid with 1 km spacing, two bus lines, eight
// zones (west and east half of each grid row) and a calibrated choice model.
namespace toy {

constexpr int kGridSize = 4;
constexpr double kSpacingM = 1000.0;
constexpr int kAgentsPerZone = 1250;
constexpr seconds_t kRegularHeadway = 300;
constexpr seconds_t kCovidHeadway = 600;
constexpr int kVehicleCapacity = 24;

road_network road();
// Line A runs along grid row 1, line B along grid column 2, both directions.
transit_schedule schedule(seconds_t headway);
schedule_variants schedules();
covsim::population_spec pop_spec(int agents_per_zone = kAgentsPerZone);
return_schedule returns();
mnl_params precovid_params();
mnl_params covid_params();
// {transit}, {car, ridehail}, {walk, bike, bikeshare} over precovid_params.
nested_params nested(double mu);
sim_config sim(int iterations = 50);

scenario_assets assets(std::uint64_t seed = 7,
                       int agents_per_zone = kAgentsPerZone);

// precovid, covid and p1-p4 at capacity factor 1, then covid and p1-p4 at
// 0.5 with an "s2_" prefix.
matrix_spec matrix(std::uint64_t seed = 7, int iterations = 50);

}  // namespace toy

}  // namespace covsim
