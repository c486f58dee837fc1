#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "covsim/choice.hpp"

namespace covsim {

// Observable names:
//   "<mode>_share"          share of trips by mode, in [0, 1]
//   "<mode>_trips_ratio"    trips relative to the baseline run, in [0, 2]
//   "subway_ridership_ratio" alias of "transit_trips_ratio"
enum class observable_kind { share, trips_ratio };

struct observable {
  mode m;
  observable_kind kind;
};

std::optional<observable> parse_observable(std::string_view name);

struct calibration_targets {
  std::map<std::string, double> values;
};

// Throws error on unknown observables, out-of-range values, duplicate modes
// or an empty target set.
void check_targets(calibration_targets const&);

calibration_targets targets_from_json(std::string const& text,
                                      std::string const& source = "<memory>");
calibration_targets load_targets(std::filesystem::path const&);

struct sim_outcome {
  mode_values shares{};
  mode_values trips{};
};

using simulate_fn = std::function<sim_outcome(mnl_params const&)>;

struct calibration_options {
  double step{1.0};
  double tol_pp{1.0};
  int max_iter{50};
  double eps{1e-6};
  // Required when any target is a trips ratio.
  std::optional<mode_values> baseline_trips;
  // Untargeted modes that move together with an anchor mode's constant.
  std::vector<std::pair<mode, mode>> anchors{{mode::ridehail, mode::car},
                                             {mode::bikeshare, mode::bike}};
};

struct calibration_result {
  mnl_params params;
  int iterations{0};
  bool converged{false};
  std::map<std::string, double> residuals;  // simulated - target
  double avg_abs_residual{0.0};
  // Average absolute residual after each simulate call, initial point first.
  std::vector<double> history;
};

calibration_result calibrate_ascs(mnl_params const& base,
                                  calibration_targets const&,
                                  simulate_fn const& simulate,
                                  calibration_options const& = {});

// Observable values of an outcome for the targeted names.
std::map<std::string, double> observe(sim_outcome const&,
                                      calibration_targets const&,
                                      std::optional<mode_values> const&
                                          baseline_trips);

double fit_error(std::map<std::string, double> const& simulated,
                 calibration_targets const&);

std::string calibration_result_to_json(calibration_result const&);

}  // namespace covsim
