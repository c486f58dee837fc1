#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "covsim/types.hpp"

namespace covsim {

enum class activity_kind : std::uint8_t { home, work, school, shop, other };

std::string_view to_string(activity_kind);
std::optional<activity_kind> parse_activity_kind(std::string_view);

struct activity {
  activity_kind kind{activity_kind::home};
  std::string zone;
  std::string node;
  seconds_t end_time{kDayEnd};

  bool operator==(activity const&) const = default;
};

struct agent {
  std::string id;
  std::string home_zone;
  std::string industry;
  bool teleworkable{false};
  std::vector<activity> agenda;

  bool has_work() const;
  // Number of trips implied by the agenda.
  std::size_t trip_count() const {
    return agenda.empty() ? 0 : agenda.size() - 1;
  }

  bool operator==(agent const&) const = default;
};

struct population {
  std::vector<agent> agents;
  std::vector<std::string> zones;

  bool operator==(population const&) const = default;
};

// Throws error naming the first violated invariant.
void check_population(population const&);

enum class phase : std::uint8_t { precovid, covid, p1, p2, p3, p4 };

std::string_view to_string(phase);
std::optional<phase> parse_phase(std::string_view);

// Fraction of teleworkable workers commuting again, per (phase, industry).
// The industry "*" is the fallback for industries without their own row.
class return_schedule {
public:
  void set(phase, std::string industry, double fraction);
  // covid is always 0, precovid always 1. Throws for a reopening phase with
  // neither an industry row nor a "*" row.
  double fraction(phase, std::string const& industry) const;
  // Throws error when a fraction decreases from p1 to p4 for some industry.
  void check_monotone() const;

  std::map<std::pair<phase, std::string>, double> const& entries() const {
    return entries_;
  }

  static return_schedule uniform(double p1, double p2, double p3, double p4);

private:
  std::map<std::pair<phase, std::string>, double> entries_;
};

return_schedule load_return_schedule(std::filesystem::path const&);
void write_return_schedule(return_schedule const&,
                           std::filesystem::path const&);

struct zone_spec {
  std::string id;
  std::vector<std::string> nodes;
  int agents{0};
  // Relative pull as a destination of non-home activities.
  double attraction{1.0};
};

struct industry_spec {
  std::string code;
  double share{1.0};
  double teleworkable_share{0.0};
};

struct template_activity {
  activity_kind kind{activity_kind::home};
  seconds_t end_time{kDayEnd};
  // End time is drawn uniformly from [end_time - jitter, end_time + jitter].
  seconds_t jitter{0};
};

struct agenda_template {
  std::string name;
  double weight{1.0};
  std::vector<template_activity> activities;
};

struct population_spec {
  std::vector<zone_spec> zones;
  std::vector<industry_spec> industries;
  std::vector<agenda_template> templates;
};

population generate_toy_population(population_spec const&, std::uint64_t seed);

struct wfh_result {
  population pop;
  std::size_t tours_removed{0};
  std::size_t agents_emptied{0};
  std::vector<std::string> warnings;
};

// Threshold draw an agent's return decision is based on.
double return_draw(std::string const& agent_id, std::uint64_t seed);

wfh_result apply_wfh(population const&, return_schedule const&, phase,
                     std::uint64_t seed);

// Share of workers in `before` with no work activity left in `after`.
double wfh_rate(population const& before, population const& after);

// Per-zone relative change of trip-making agents by home zone; nullopt where
// the zone had none before.
std::map<std::string, std::optional<double>> zone_agent_delta(
    population const& before, population const& after);

population load_population(std::filesystem::path const&);
void write_population(population const&, std::filesystem::path const&);
std::string population_to_json(population const&);
population population_from_json(std::string const& text,
                                 std::string const& source = "<memory>");

}  // namespace covsim
