#include <algorithm>

#include "covsim/engine.hpp"

namespace covsim {

namespace {

double clamped_hours(seconds_t from, seconds_t to, seconds_t day_end) {
  from = std::clamp(from, seconds_t{0}, day_end);
  to = std::clamp(to, seconds_t{0}, day_end);
  return to > from ? (to - from) / 3600.0 : 0.0;
}

struct agent_tally {
  seconds_t activity_start{0};
  seconds_t depart{0};
  bool travelling{false};
  double activity_h{0.0};
  double travel_h{0.0};
  int denied{0};
  int stuck{0};
};

}  // namespace

std::vector<double> score_plans(event_log const& events,
                                std::size_t const agent_count,
                                sim_config const& cfg) {
  std::vector<agent_tally> tally(agent_count);
  for (auto const& e : events) {
    if (e.agent >= agent_count) {
      throw error{"score_plans: event agent out of range"};
    }
    auto& a = tally[e.agent];
    switch (e.kind) {
      case event_kind::depart:
        a.activity_h += clamped_hours(a.activity_start, e.t, cfg.day_end);
        a.depart = e.t;
        a.travelling = true;
        break;
      case event_kind::denied_boarding: ++a.denied; break;
      case event_kind::stuck:
      case event_kind::denied_abort:
      case event_kind::arrive:
        if (e.kind == event_kind::stuck) {
          ++a.stuck;
        }
        a.travel_h += (e.t - a.depart) / 3600.0;
        a.activity_start = e.t;
        a.travelling = false;
        break;
      default: break;
    }
  }
  std::vector<double> scores(agent_count);
  for (std::size_t i = 0; i < agent_count; ++i) {
    auto& a = tally[i];
    if (!a.travelling) {
      a.activity_h += clamped_hours(a.activity_start, cfg.day_end, cfg.day_end);
    }
    scores[i] = cfg.score_beta_perf * a.activity_h -
                cfg.score_beta_travel * a.travel_h -
                cfg.denied_boarding_penalty * a.denied -
                cfg.stuck_penalty * a.stuck;
  }
  return scores;
}

}  // namespace covsim
