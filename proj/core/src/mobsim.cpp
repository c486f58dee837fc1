#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <queue>
#include <set>

#include "fmt/core.h"
#include "json.hpp"

#include "covsim/engine.hpp"

namespace covsim {

std::string_view to_string(event_kind const k) {
  switch (k) {
    case event_kind::depart: return "depart";
    case event_kind::enter_link: return "enter_link";
    case event_kind::leave_link: return "leave_link";
    case event_kind::board: return "board";
    case event_kind::alight: return "alight";
    case event_kind::denied_boarding: return "denied_boarding";
    case event_kind::arrive: return "arrive";
    case event_kind::stuck: return "stuck";
    case event_kind::denied_abort: return "denied_abort";
  }
  return "?";
}

void write_events_jsonl(std::ostream& out, event_log const& events,
                        population const& pop, sim_network const& net) {
  for (auto const& e : events) {
    std::string loc;
    switch (e.where) {
      case loc_kind::node: loc = net.road().nodes[e.loc].id; break;
      case loc_kind::link: loc = net.road().links[e.loc].id; break;
      case loc_kind::stop: loc = net.schedule().stops[e.loc].id; break;
    }
    out << fmt::format(
        R"({{"t":{},"agent":{},"kind":"{}","loc":{},"mode":"{}"}})", e.t,
        nlohmann::json(pop.agents[e.agent].id).dump(), to_string(e.kind),
        nlohmann::json(loc).dump(), to_string(e.m))
        << '\n';
  }
}

void write_stats_csv(std::ostream& out,
                     std::span<iteration_stats const> stats) {
  out << "iteration,avg_score,denied_boardings";
  for (auto const* prefix : {"planned", "arrived", "stuck", "denied"}) {
    for (auto const m : kAllModes) {
      out << ',' << prefix << '_' << to_string(m);
    }
  }
  out << '\n';
  for (auto const& s : stats) {
    out << fmt::format("{},{:.6f},{}", s.iteration, s.avg_score,
                       s.denied_boardings);
    for (auto const* counts :
         {&s.planned, &s.arrived, &s.stuck, &s.denied_terminated}) {
      for (auto const c : *counts) {
        out << ',' << c;
      }
    }
    out << '\n';
  }
}

namespace {

constexpr auto kNone = std::numeric_limits<std::uint32_t>::max();

enum class wake_kind : std::uint8_t {
  start_trip,
  teleport_done,
  reach_stop,
  egress_done,
  ridehail_enter,
  wait_timeout
};

struct wakeup {
  seconds_t t;
  std::uint8_t cls;  // 0 before vehicle events, 1 after
  std::uint32_t p;
  std::uint32_t token;
  wake_kind kind;

  bool operator>(wakeup const& o) const {
    return std::tie(t, cls, p, token) > std::tie(o.t, o.cls, o.p, o.token);
  }
};

enum class agent_state : std::uint8_t {
  idle,
  pending,
  on_link,
  teleport,
  waiting,
  onboard,
  done
};

struct agent_run {
  std::size_t trip{0};
  agent_state state{agent_state::idle};
  std::size_t route_pos{0};
  seconds_t link_enter{0};
  seconds_t stop_arrival{0};
  std::uint32_t token{0};
  trip_outcome current;
};

struct link_run {
  std::deque<std::pair<std::uint32_t, seconds_t>> queue;  // (plan, ready)
  std::deque<std::uint32_t> pending;
  double allowance{0.0};
  double cap{1.0};
  double flow_per_s{0.0};
  seconds_t last_update{0};
  seconds_t blocked_since{-1};
  std::size_t storage{1};
  seconds_t traversal{1};
};

struct waiter {
  std::uint32_t p;
  seconds_t arrival;
};

struct vehicle_event {
  seconds_t t;
  std::uint8_t kind;  // 0 arrival, 1 departure
  std::uint32_t trip;
  std::uint32_t pos;

  bool operator<(vehicle_event const& o) const {
    return std::tie(t, kind, trip, pos) < std::tie(o.t, o.kind, o.trip, o.pos);
  }
};

class mobsim {
public:
  mobsim(std::span<agent_plan const> plans, sim_network const& net,
         sim_config const& cfg)
      : plans_{plans},
        net_{net},
        cfg_{cfg},
        agents_(plans.size()),
        links_(net.road().links.size()) {
    res_.feedback = travel_feedback{net, cfg.travel_time_bin, cfg.end_time};
    res_.outcomes.resize(plans.size());

    for (std::size_t l = 0; l < links_.size(); ++l) {
      auto const& link = net.road().links[l];
      auto& lr = links_[l];
      lr.storage = std::max<std::size_t>(
          1, static_cast<std::size_t>(link.length_m / cfg.vehicle_length_m));
      lr.flow_per_s = link.capacity_vph / 3600.0;
      lr.cap = std::max(1.0, lr.flow_per_s * cfg.timestep);
      lr.allowance = lr.cap;
      lr.traversal = std::max<seconds_t>(
          1, static_cast<seconds_t>(std::ceil(link.free_flow_time())));
    }

    auto const& sched = net.schedule();
    waiting_.resize(net.patterns().size());
    for (std::size_t p = 0; p < net.patterns().size(); ++p) {
      waiting_[p].resize(net.patterns()[p].stops.size());
    }
    onboard_.resize(sched.trips.size());
    capacity_.resize(sched.trips.size());
    for (std::size_t t = 0; t < sched.trips.size(); ++t) {
      auto const& pat = net.patterns()[net.pattern_of_trip(t)];
      capacity_[t] = static_cast<std::size_t>(
          std::floor(pat.vehicle_capacity * cfg.capacity_factor + 1e-9));
      auto const& sts = sched.trips[t].stop_times;
      for (std::size_t pos = 0; pos < sts.size(); ++pos) {
        if (pos > 0) {
          vehicle_events_.push_back({sts[pos].arrival, 0,
                                     static_cast<std::uint32_t>(t),
                                     static_cast<std::uint32_t>(pos)});
        }
        if (pos + 1 < sts.size()) {
          vehicle_events_.push_back({sts[pos].departure, 1,
                                     static_cast<std::uint32_t>(t),
                                     static_cast<std::uint32_t>(pos)});
        }
      }
    }
    std::sort(begin(vehicle_events_), end(vehicle_events_));

    for (std::size_t p = 0; p < plans.size(); ++p) {
      auto const& trips = plans[p].trips;
      res_.outcomes[p].resize(trips.size());
      for (auto const& tr : trips) {
        ++res_.stats.planned[index_of(tr.m)];
      }
      if (!trips.empty()) {
        schedule_start(static_cast<std::uint32_t>(p),
                       trips.front().planned_departure);
      }
    }
  }

  mobsim_result run() {
    seconds_t t = 0;
    while (true) {
      auto const next = next_time(t);
      if (!next || *next > cfg_.end_time) {
        break;
      }
      t = *next;
      step(t);
    }
    finish_day();
    return std::move(res_);
  }

private:
  // ---- bookkeeping -------------------------------------------------------

  agent_plan const& plan(std::uint32_t p) const { return plans_[p]; }
  trip_plan const& trip(std::uint32_t p) const {
    return plans_[p].trips[agents_[p].trip];
  }

  void emit(seconds_t t, std::uint32_t p, event_kind k, loc_kind w,
            std::size_t loc) {
    res_.events.push_back({t, static_cast<std::uint32_t>(plan(p).agent),
                           static_cast<std::uint32_t>(loc), k, w, trip(p).m});
  }

  void wake(seconds_t t, std::uint8_t cls, std::uint32_t p, wake_kind k,
            std::uint32_t token = 0) {
    wakeups_.push({t, cls, p, token, k});
  }

  void schedule_start(std::uint32_t p, seconds_t t) {
    wake(t, 0, p, wake_kind::start_trip);
  }

  void finish_trip(std::uint32_t p, seconds_t t, trip_status status) {
    auto& a = agents_[p];
    auto const m = trip(p).m;
    a.current.status = status;
    a.current.end = t;
    res_.outcomes[p][a.trip] = a.current;
    switch (status) {
      case trip_status::arrived: ++res_.stats.arrived[index_of(m)]; break;
      case trip_status::stuck: ++res_.stats.stuck[index_of(m)]; break;
      case trip_status::denied:
        ++res_.stats.denied_terminated[index_of(m)];
        break;
    }
    a.state = agent_state::idle;
    ++a.trip;
    ++a.token;
    if (a.trip < plan(p).trips.size()) {
      schedule_start(p, std::max(t, trip(p).planned_departure));
    } else {
      a.state = agent_state::done;
    }
  }

  void arrive(std::uint32_t p, seconds_t t) {
    emit(t, p, event_kind::arrive, loc_kind::node, trip(p).dest);
    finish_trip(p, t, trip_status::arrived);
  }

  // Ends the trip without reaching the destination by the planned means; the
  // agent continues the day from the destination.
  void abort_trip(std::uint32_t p, seconds_t t, trip_status status) {
    emit(t, p,
         status == trip_status::denied ? event_kind::denied_abort
                                       : event_kind::stuck,
         loc_kind::node, trip(p).dest);
    finish_trip(p, t, status);
  }

  // ---- time control ------------------------------------------------------

  std::optional<seconds_t> next_time(seconds_t const now) {
    std::optional<seconds_t> next;
    auto const consider = [&](seconds_t t) {
      t = std::max(t, now);
      if (!next || t < *next) {
        next = t;
      }
    };
    if (!wakeups_.empty()) {
      consider(wakeups_.top().t);
    }
    if (next_vehicle_event_ < vehicle_events_.size()) {
      consider(vehicle_events_[next_vehicle_event_].t);
    }
    for (auto const l : active_) {
      consider(link_due(l, now));
    }
    return next;
  }

  seconds_t link_due(std::size_t const l, seconds_t const now) const {
    auto const& lr = links_[l];
    auto const step = cfg_.timestep;
    seconds_t due = std::numeric_limits<seconds_t>::max();
    if (!lr.pending.empty()) {
      due = lr.queue.size() < lr.storage ? now : now + step;
    }
    if (!lr.queue.empty()) {
      auto const ready = lr.queue.front().second;
      if (ready > now) {
        due = std::min(due, ready);
      } else {
        auto const avail = lr.allowance +
                           lr.flow_per_s * static_cast<double>(now - lr.last_update);
        if (std::min(avail, lr.cap) >= 1.0) {
          // Ready and allowed but blocked downstream.
          due = std::min(due, now + step);
        } else {
          auto const wait = static_cast<seconds_t>(
              std::ceil((1.0 - std::min(avail, lr.cap)) / lr.flow_per_s));
          due = std::min(due, now + std::max(step, wait));
        }
      }
    }
    if (due != std::numeric_limits<seconds_t>::max() && due % step != 0) {
      due += step - due % step;
    }
    return due;
  }

  void step(seconds_t const t) {
    // Links in ascending index; a vehicle moved downstream is never ready in
    // the same step because traversal takes at least one second.
    std::vector<std::size_t> const snapshot{begin(active_), end(active_)};
    for (auto const l : snapshot) {
      process_link(l, t);
    }
    while (!wakeups_.empty() && wakeups_.top().t <= t &&
           wakeups_.top().cls == 0) {
      auto const w = wakeups_.top();
      wakeups_.pop();
      handle(w, t);
    }
    while (next_vehicle_event_ < vehicle_events_.size() &&
           vehicle_events_[next_vehicle_event_].t <= t) {
      handle(vehicle_events_[next_vehicle_event_++]);
    }
    while (!wakeups_.empty() && wakeups_.top().t <= t) {
      auto const w = wakeups_.top();
      wakeups_.pop();
      handle(w, t);
    }
  }

  // ---- road --------------------------------------------------------------

  void enter_link(std::uint32_t p, std::size_t l, seconds_t t) {
    auto& a = agents_[p];
    a.state = agent_state::on_link;
    a.link_enter = t;
    emit(t, p, event_kind::enter_link, loc_kind::link, l);
    links_[l].queue.emplace_back(p, t + links_[l].traversal);
    active_.insert(l);
  }

  void leave_link(std::uint32_t p, std::size_t l, seconds_t t) {
    emit(t, p, event_kind::leave_link, loc_kind::link, l);
    res_.feedback.record_link(l, agents_[p].link_enter,
                              t - agents_[p].link_enter);
  }

  void start_on_road(std::uint32_t p, seconds_t t) {
    auto const& tr = trip(p);
    if (tr.links.empty()) {
      arrive(p, t);
      return;
    }
    auto& a = agents_[p];
    a.state = agent_state::pending;
    a.route_pos = 0;
    links_[tr.links.front()].pending.push_back(p);
    active_.insert(tr.links.front());
  }

  void process_link(std::size_t const l, seconds_t const t) {
    auto& lr = links_[l];
    lr.allowance = std::min(
        lr.cap,
        lr.allowance + lr.flow_per_s * static_cast<double>(t - lr.last_update));
    lr.last_update = t;

    while (!lr.queue.empty() && lr.queue.front().second <= t) {
      auto const p = lr.queue.front().first;
      auto& a = agents_[p];
      auto const& route = trip(p).links;
      if (lr.allowance < 1.0) {
        break;
      }
      if (a.route_pos + 1 == route.size()) {
        lr.queue.pop_front();
        lr.allowance -= 1.0;
        lr.blocked_since = -1;
        leave_link(p, l, t);
        arrive(p, t);
        continue;
      }
      auto const n = route[a.route_pos + 1];
      if (links_[n].queue.size() >= links_[n].storage) {
        if (lr.blocked_since < 0) {
          lr.blocked_since = t;
        }
        if (t - lr.blocked_since < cfg_.stuck_time) {
          break;
        }
        lr.queue.pop_front();
        lr.blocked_since = -1;
        leave_link(p, l, t);
        abort_trip(p, t, trip_status::stuck);
        continue;
      }
      lr.queue.pop_front();
      lr.allowance -= 1.0;
      lr.blocked_since = -1;
      leave_link(p, l, t);
      ++a.route_pos;
      enter_link(p, n, t);
    }

    while (!lr.pending.empty() && lr.queue.size() < lr.storage) {
      auto const p = lr.pending.front();
      lr.pending.pop_front();
      enter_link(p, l, t);
    }

    if (lr.queue.empty() && lr.pending.empty()) {
      active_.erase(l);
    }
  }

  // ---- agents ------------------------------------------------------------

  void handle(wakeup const& w, seconds_t const t) {
    auto const p = w.p;
    auto& a = agents_[p];
    switch (w.kind) {
      case wake_kind::start_trip: start_trip(p, t); break;
      case wake_kind::teleport_done:
      case wake_kind::egress_done: arrive(p, t); break;
      case wake_kind::ridehail_enter: start_on_road(p, t); break;
      case wake_kind::reach_stop: reach_stop(p, t); break;
      case wake_kind::wait_timeout:
        if (a.state == agent_state::waiting && a.token == w.token) {
          auto const& leg = *trip(p).transit;
          auto& list = waiting_[leg.pattern][leg.board_pos];
          std::erase_if(list, [&](waiter const& x) { return x.p == p; });
          res_.feedback.record_wait(leg.pattern, leg.board_pos, a.stop_arrival,
                                    cfg_.max_wait);
          abort_trip(p, t,
                     a.current.denied > 0 ? trip_status::denied
                                          : trip_status::stuck);
        }
        break;
    }
  }

  void start_trip(std::uint32_t p, seconds_t t) {
    auto& a = agents_[p];
    auto const& tr = trip(p);
    a.current = trip_outcome{};
    a.current.depart = t;
    emit(t, p, event_kind::depart, loc_kind::node, tr.origin);
    if (!tr.routed) {
      abort_trip(p, t, trip_status::stuck);
      return;
    }
    switch (tr.m) {
      case mode::car: start_on_road(p, t); break;
      case mode::ridehail:
        a.state = agent_state::teleport;
        wake(t + cfg_.ridehail_wait, 0, p, wake_kind::ridehail_enter);
        break;
      case mode::walk:
      case mode::bike:
      case mode::bikeshare: {
        auto const speed =
            tr.m == mode::walk ? cfg_.walk_speed_mps : cfg_.bike_speed_mps;
        auto d = static_cast<seconds_t>(std::lround(tr.distance_m / speed));
        if (tr.m == mode::bikeshare) {
          d += cfg_.bikeshare_access;
        }
        a.state = agent_state::teleport;
        wake(t + d, 0, p, wake_kind::teleport_done);
        break;
      }
      case mode::transit: {
        auto const& leg = *tr.transit;
        a.state = agent_state::teleport;
        wake(t + static_cast<seconds_t>(
                     std::lround(leg.access_m / cfg_.walk_speed_mps)),
             0, p, wake_kind::reach_stop);
        break;
      }
    }
  }

  void reach_stop(std::uint32_t p, seconds_t t) {
    auto& a = agents_[p];
    auto const& leg = *trip(p).transit;
    a.state = agent_state::waiting;
    a.stop_arrival = t;
    waiting_[leg.pattern][leg.board_pos].push_back({p, t});
    wake(t + cfg_.max_wait, 1, p, wake_kind::wait_timeout, a.token);
  }

  // ---- transit -----------------------------------------------------------

  void handle(vehicle_event const& ev) {
    auto const pattern = net_.pattern_of_trip(ev.trip);
    auto const stop = net_.patterns()[pattern].stops[ev.pos];
    auto& riders = onboard_[ev.trip];
    if (ev.kind == 0) {
      std::vector<std::uint32_t> staying;
      for (auto const p : riders) {
        auto const& leg = *trip(p).transit;
        if (leg.alight_pos != ev.pos) {
          staying.push_back(p);
          continue;
        }
        emit(ev.t, p, event_kind::alight, loc_kind::stop, stop);
        agents_[p].state = agent_state::teleport;
        wake(ev.t + static_cast<seconds_t>(
                        std::lround(leg.egress_m / cfg_.walk_speed_mps)),
             0, p, wake_kind::egress_done);
      }
      riders = std::move(staying);
      return;
    }
    auto& list = waiting_[pattern][ev.pos];
    std::vector<waiter> left;
    for (auto const& w : list) {
      auto& a = agents_[w.p];
      if (riders.size() < capacity_[ev.trip]) {
        emit(ev.t, w.p, event_kind::board, loc_kind::stop, stop);
        riders.push_back(w.p);
        a.state = agent_state::onboard;
        auto const scheduled = net_.next_departure(pattern, ev.pos, w.arrival);
        res_.feedback.record_wait(pattern, ev.pos, w.arrival,
                                  ev.t - (scheduled ? scheduled->first : ev.t));
      } else {
        emit(ev.t, w.p, event_kind::denied_boarding, loc_kind::stop, stop);
        ++a.current.denied;
        ++res_.stats.denied_boardings;
        left.push_back(w);
      }
    }
    list = std::move(left);
  }

  // ---- end of day --------------------------------------------------------

  void finish_day() {
    auto const t = cfg_.end_time;
    for (std::uint32_t p = 0; p < agents_.size(); ++p) {
      auto& a = agents_[p];
      if (a.state == agent_state::done) {
        continue;
      }
      if (a.state != agent_state::idle) {
        if (a.state == agent_state::on_link) {
          auto const l = trip(p).links[a.route_pos];
          leave_link(p, l, t);
        }
        emit(t, p, event_kind::stuck, loc_kind::node, trip(p).dest);
        a.current.status = trip_status::stuck;
        a.current.end = t;
        res_.outcomes[p][a.trip] = a.current;
        ++res_.stats.stuck[index_of(trip(p).m)];
        ++a.trip;
      }
      // Trips that never started.
      for (; a.trip < plan(p).trips.size(); ++a.trip) {
        res_.outcomes[p][a.trip] =
            trip_outcome{trip_status::stuck, t, t, 0};
        ++res_.stats.stuck[index_of(trip(p).m)];
      }
      a.state = agent_state::done;
    }
  }

  std::span<agent_plan const> plans_;
  sim_network const& net_;
  sim_config const& cfg_;
  std::vector<agent_run> agents_;
  std::vector<link_run> links_;
  std::set<std::size_t> active_;
  std::priority_queue<wakeup, std::vector<wakeup>, std::greater<>> wakeups_;
  std::vector<vehicle_event> vehicle_events_;
  std::size_t next_vehicle_event_{0};
  std::vector<std::vector<std::vector<waiter>>> waiting_;
  std::vector<std::vector<std::uint32_t>> onboard_;
  std::vector<std::size_t> capacity_;
  mobsim_result res_;
};

}  // namespace

mobsim_result run_mobsim(std::span<agent_plan const> plans,
                         population const& pop, sim_network const& net,
                         sim_config const& cfg) {
  cfg.check();
  for (auto const& pl : plans) {
    if (pl.agent >= pop.agents.size()) {
      throw error{fmt::format("plan references agent index {} of {}", pl.agent,
                              pop.agents.size())};
    }
    for (auto const& tr : pl.trips) {
      if (tr.tour >= pl.tour_modes.size()) {
        throw error{fmt::format("agent '{}': trip tour {} has no mode",
                                pop.agents[pl.agent].id, tr.tour)};
      }
      if (tr.routed && tr.m == mode::transit && !tr.transit) {
        throw error{fmt::format("agent '{}': transit trip without a leg",
                                pop.agents[pl.agent].id)};
      }
    }
  }
  return mobsim{plans, net, cfg}.run();
}

}  // namespace covsim
