#include "covsim/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "fmt/core.h"
#include "json.hpp"

#include "covsim/csv.hpp"
#include "covsim/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace covsim {

std::string_view to_string(activity_kind const k) {
  switch (k) {
    case activity_kind::home: return "home";
    case activity_kind::work: return "work";
    case activity_kind::school: return "school";
    case activity_kind::shop: return "shop";
    case activity_kind::other: return "other";
  }
  return "?";
}

std::optional<activity_kind> parse_activity_kind(std::string_view const s) {
  for (auto const k : {activity_kind::home, activity_kind::work,
                       activity_kind::school, activity_kind::shop,
                       activity_kind::other}) {
    if (to_string(k) == s) {
      return k;
    }
  }
  return std::nullopt;
}

std::string_view to_string(phase const p) {
  switch (p) {
    case phase::precovid: return "precovid";
    case phase::covid: return "covid";
    case phase::p1: return "p1";
    case phase::p2: return "p2";
    case phase::p3: return "p3";
    case phase::p4: return "p4";
  }
  return "?";
}

std::optional<phase> parse_phase(std::string_view const s) {
  if (s == "precovid") return phase::precovid;
  if (s == "covid") return phase::covid;
  if (s == "p1" || s == "1") return phase::p1;
  if (s == "p2" || s == "2") return phase::p2;
  if (s == "p3" || s == "3") return phase::p3;
  if (s == "p4" || s == "4") return phase::p4;
  return std::nullopt;
}

bool agent::has_work() const {
  return std::any_of(begin(agenda), end(agenda), [](activity const& a) {
    return a.kind == activity_kind::work;
  });
}

void check_population(population const& pop) {
  std::unordered_set<std::string> zones(begin(pop.zones), end(pop.zones));
  std::unordered_set<std::string> ids;
  for (auto const& a : pop.agents) {
    if (!ids.insert(a.id).second) {
      throw error{fmt::format("duplicate agent id '{}'", a.id)};
    }
    if (a.agenda.empty() || a.agenda.front().kind != activity_kind::home ||
        a.agenda.back().kind != activity_kind::home) {
      throw error{fmt::format(
          "agent '{}': agenda must start and end with a home activity", a.id)};
    }
    if (!zones.contains(a.home_zone)) {
      throw error{fmt::format("agent '{}': unknown home zone '{}'", a.id,
                              a.home_zone)};
    }
    for (std::size_t i = 0; i < a.agenda.size(); ++i) {
      auto const& act = a.agenda[i];
      if (!zones.contains(act.zone)) {
        throw error{fmt::format("agent '{}': unknown zone '{}'", a.id,
                                act.zone)};
      }
      if (act.end_time < 0 || act.end_time > kMaxSimTime) {
        throw error{fmt::format("agent '{}': end_time {} outside the day",
                                a.id, act.end_time)};
      }
      if (i > 0 && act.end_time <= a.agenda[i - 1].end_time) {
        throw error{fmt::format(
            "agent '{}': activity time windows overlap at position {}", a.id,
            i)};
      }
    }
  }
}

void return_schedule::set(phase const p, std::string industry,
                          double const fraction) {
  if (p == phase::precovid || p == phase::covid) {
    throw error{fmt::format("return fractions are fixed for phase '{}'",
                            to_string(p))};
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw error{fmt::format("return fraction {} outside [0, 1]", fraction)};
  }
  entries_[{p, std::move(industry)}] = fraction;
}

double return_schedule::fraction(phase const p,
                                 std::string const& industry) const {
  if (p == phase::covid) {
    return 0.0;
  }
  if (p == phase::precovid) {
    return 1.0;
  }
  if (auto const it = entries_.find({p, industry}); it != end(entries_)) {
    return it->second;
  }
  if (auto const it = entries_.find({p, "*"}); it != end(entries_)) {
    return it->second;
  }
  throw error{fmt::format("return schedule has no entry for phase '{}', "
                          "industry '{}'",
                          to_string(p), industry)};
}

void return_schedule::check_monotone() const {
  std::set<std::string> industries;
  for (auto const& [k, v] : entries_) {
    industries.insert(k.second);
  }
  for (auto const& ind : industries) {
    double prev = 0.0;
    for (auto const p : {phase::p1, phase::p2, phase::p3, phase::p4}) {
      auto const f = fraction(p, ind);
      if (f < prev) {
        throw error{fmt::format(
            "return fraction for industry '{}' decreases at phase '{}'", ind,
            to_string(p))};
      }
      prev = f;
    }
  }
}

return_schedule return_schedule::uniform(double const p1, double const p2,
                                         double const p3, double const p4) {
  return_schedule s;
  s.set(phase::p1, "*", p1);
  s.set(phase::p2, "*", p2);
  s.set(phase::p3, "*", p3);
  s.set(phase::p4, "*", p4);
  return s;
}

return_schedule load_return_schedule(fs::path const& path) {
  auto const t = csv_table::read(path);
  auto const c_phase = t.column("phase");
  auto const c_ind = t.column("industry");
  auto const c_frac = t.column("fraction");
  return_schedule s;
  for (auto const& r : t.rows()) {
    auto const p = parse_phase(t.str(r, c_phase));
    if (!p || *p == phase::precovid || *p == phase::covid) {
      throw parse_error{t.source(), r.line,
                        fmt::format("phase must be one of 1-4/p1-p4, got '{}'",
                                    t.str(r, c_phase))};
    }
    auto const f = t.number(r, c_frac);
    if (!(f >= 0.0 && f <= 1.0)) {
      throw parse_error{t.source(), r.line,
                        fmt::format("fraction {} outside [0, 1]", f)};
    }
    s.set(*p, t.str(r, c_ind), f);
  }
  try {
    s.check_monotone();
  } catch (error const& e) {
    throw parse_error{t.source(), e.what()};
  }
  return s;
}

void write_return_schedule(return_schedule const& s, fs::path const& path) {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw error{fmt::format("cannot write {}", path.string())};
  }
  out << "phase,industry,fraction\n";
  for (auto const& [k, v] : s.entries()) {
    out << to_string(k.first) << ',' << csv_escape(k.second) << ','
        << format_double(v) << '\n';
  }
}

namespace {

template <typename T, typename WeightFn>
std::size_t weighted_pick(std::vector<T> const& items, WeightFn&& weight,
                          rng_t& rng) {
  double total = 0.0;
  for (auto const& it : items) {
    total += weight(it);
  }
  auto const u = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    acc += weight(items[i]);
    if (u < acc) {
      return i;
    }
  }
  return items.size() - 1;
}

void check_sum_to_one(double const sum, char const* what) {
  if (std::abs(sum - 1.0) > 1e-9) {
    throw error{fmt::format("{} sum to {}, expected 1", what, sum)};
  }
}

}  // namespace

population generate_toy_population(population_spec const& spec,
                                   std::uint64_t const seed) {
  if (spec.zones.empty()) {
    throw error{"population spec has no zones"};
  }
  if (spec.templates.empty()) {
    throw error{"population spec has no agenda templates"};
  }
  check_sum_to_one(
      std::accumulate(begin(spec.templates), end(spec.templates), 0.0,
                      [](double s, agenda_template const& t) {
                        return s + t.weight;
                      }),
      "agenda template weights");
  auto const any_work = std::any_of(
      begin(spec.templates), end(spec.templates), [](agenda_template const& t) {
        return std::any_of(begin(t.activities), end(t.activities),
                           [](template_activity const& a) {
                             return a.kind == activity_kind::work;
                           });
      });
  if (any_work) {
    check_sum_to_one(
        std::accumulate(begin(spec.industries), end(spec.industries), 0.0,
                        [](double s, industry_spec const& i) {
                          return s + i.share;
                        }),
        "industry shares");
  }
  for (auto const& z : spec.zones) {
    if (z.nodes.empty()) {
      throw error{fmt::format("zone '{}' has no nodes", z.id)};
    }
  }
  for (auto const& t : spec.templates) {
    if (t.activities.empty() || t.activities.front().kind != activity_kind::home ||
        t.activities.back().kind != activity_kind::home) {
      throw error{fmt::format(
          "agenda template '{}' must start and end at home", t.name)};
    }
  }

  rng_t rng{splitmix64(seed)};
  population pop;
  for (auto const& z : spec.zones) {
    pop.zones.push_back(z.id);
  }
  auto const attraction = [](zone_spec const& z) { return z.attraction; };
  auto const pick_node = [&](zone_spec const& z) -> std::string const& {
    return z.nodes[uniform_below(rng, z.nodes.size())];
  };

  std::size_t serial = 0;
  for (auto const& home : spec.zones) {
    for (int i = 0; i < home.agents; ++i) {
      agent a;
      a.id = fmt::format("a{:06}", serial++);
      a.home_zone = home.id;
      auto const& tpl = spec.templates[weighted_pick(
          spec.templates, [](agenda_template const& t) { return t.weight; },
          rng)];
      auto const& home_node = pick_node(home);
      zone_spec const* anchor_zone = nullptr;
      std::string anchor_node;
      for (auto const& ta : tpl.activities) {
        activity act;
        act.kind = ta.kind;
        zone_spec const* z = nullptr;
        if (ta.kind == activity_kind::home) {
          z = &home;
          act.node = home_node;
        } else if (ta.kind == activity_kind::work ||
                   ta.kind == activity_kind::school) {
          // Work and school locations are fixed for the day.
          if (anchor_zone == nullptr) {
            anchor_zone =
                &spec.zones[weighted_pick(spec.zones, attraction, rng)];
            anchor_node = pick_node(*anchor_zone);
          }
          z = anchor_zone;
          act.node = anchor_node;
        } else {
          z = &spec.zones[weighted_pick(spec.zones, attraction, rng)];
          act.node = pick_node(*z);
        }
        act.zone = z->id;
        act.end_time = ta.end_time;
        if (ta.jitter > 0) {
          act.end_time += static_cast<seconds_t>(
              uniform_below(rng, 2 * static_cast<std::uint64_t>(ta.jitter) + 1)) -
                          ta.jitter;
        }
        if (!a.agenda.empty()) {
          act.end_time = std::max(act.end_time, a.agenda.back().end_time + 60);
        }
        act.end_time = std::clamp(act.end_time, seconds_t{0}, kMaxSimTime);
        a.agenda.push_back(std::move(act));
      }
      pop.agents.push_back(std::move(a));
    }
  }

  // Industries for workers, then an exact teleworkable quota per industry.
  std::vector<std::vector<std::size_t>> by_industry(spec.industries.size());
  for (std::size_t i = 0; i < pop.agents.size(); ++i) {
    auto& a = pop.agents[i];
    if (!a.has_work()) {
      continue;
    }
    auto const k = weighted_pick(
        spec.industries, [](industry_spec const& s) { return s.share; }, rng);
    a.industry = spec.industries[k].code;
    by_industry[k].push_back(i);
  }
  for (std::size_t k = 0; k < by_industry.size(); ++k) {
    auto& members = by_industry[k];
    auto const quota = static_cast<std::size_t>(std::llround(
        spec.industries[k].teleworkable_share *
        static_cast<double>(members.size())));
    for (std::size_t j = 0; j < quota; ++j) {
      auto const pick = j + uniform_below(rng, members.size() - j);
      std::swap(members[j], members[pick]);
      pop.agents[members[j]].teleworkable = true;
    }
  }
  return pop;
}

double return_draw(std::string const& agent_id, std::uint64_t const seed) {
  return keyed_uniform(agent_id, seed);
}

namespace {

// Drops every home-based tour containing a work activity, then merges the
// resulting adjacent home activities. Returns the number of tours removed.
std::size_t remove_work_tours(std::vector<activity>& agenda) {
  std::vector<activity> kept;
  std::size_t removed = 0;
  std::size_t i = 0;
  while (i < agenda.size()) {
    if (agenda[i].kind == activity_kind::home) {
      kept.push_back(agenda[i]);
      ++i;
      continue;
    }
    auto j = i;
    bool work = false;
    while (j < agenda.size() && agenda[j].kind != activity_kind::home) {
      work = work || agenda[j].kind == activity_kind::work;
      ++j;
    }
    if (work) {
      ++removed;
    } else {
      kept.insert(end(kept), begin(agenda) + static_cast<std::ptrdiff_t>(i),
                  begin(agenda) + static_cast<std::ptrdiff_t>(j));
    }
    i = j;
  }
  std::vector<activity> merged;
  for (auto& a : kept) {
    if (!merged.empty() && merged.back().kind == activity_kind::home &&
        a.kind == activity_kind::home) {
      merged.back().end_time = a.end_time;
      continue;
    }
    merged.push_back(std::move(a));
  }
  agenda = std::move(merged);
  return removed;
}

}  // namespace

wfh_result apply_wfh(population const& pop, return_schedule const& schedule,
                     phase const p, std::uint64_t const seed) {
  if (p == phase::precovid) {
    throw error{"apply_wfh: phase must be one of covid, p1, p2, p3, p4"};
  }
  wfh_result res;
  res.pop = pop;
  for (auto& a : res.pop.agents) {
    if (!a.teleworkable || !a.has_work()) {
      continue;
    }
    auto const f = schedule.fraction(p, a.industry);
    if (return_draw(a.id, seed) < f) {
      continue;
    }
    res.tours_removed += remove_work_tours(a.agenda);
    if (a.agenda.size() == 1) {
      ++res.agents_emptied;
      res.warnings.push_back(fmt::format(
          "agent '{}' has no trips left; kept as an all-day home activity",
          a.id));
    }
  }
  return res;
}

double wfh_rate(population const& before, population const& after) {
  std::unordered_map<std::string, agent const*> by_id;
  for (auto const& a : after.agents) {
    by_id.emplace(a.id, &a);
  }
  std::size_t workers = 0;
  std::size_t suppressed = 0;
  for (auto const& a : before.agents) {
    auto const it = by_id.find(a.id);
    if (it == end(by_id)) {
      throw error{fmt::format("wfh_rate: agent '{}' missing after", a.id)};
    }
    if (!a.has_work()) {
      continue;
    }
    ++workers;
    if (!it->second->has_work()) {
      ++suppressed;
    }
  }
  if (workers == 0) {
    throw error{"wfh_rate: no workers in the reference population"};
  }
  return static_cast<double>(suppressed) / static_cast<double>(workers);
}

std::map<std::string, std::optional<double>> zone_agent_delta(
    population const& before, population const& after) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (auto const& z : before.zones) {
    counts[z];
  }
  for (auto const& z : after.zones) {
    counts[z];
  }
  for (auto const& a : before.agents) {
    if (a.trip_count() > 0) {
      ++counts[a.home_zone].first;
    }
  }
  for (auto const& a : after.agents) {
    if (a.trip_count() > 0) {
      ++counts[a.home_zone].second;
    }
  }
  std::map<std::string, std::optional<double>> out;
  for (auto const& [zone, c] : counts) {
    if (c.first == 0) {
      out[zone] = std::nullopt;
    } else {
      out[zone] = (static_cast<double>(c.second) - static_cast<double>(c.first)) /
                  static_cast<double>(c.first);
    }
  }
  return out;
}

std::string population_to_json(population const& pop) {
  auto arr = json::array();
  for (auto const& a : pop.agents) {
    auto agenda = json::array();
    for (auto const& act : a.agenda) {
      agenda.push_back({{"kind", to_string(act.kind)},
                        {"zone", act.zone},
                        {"node", act.node},
                        {"end_time", act.end_time}});
    }
    arr.push_back({{"id", a.id},
                   {"home_zone", a.home_zone},
                   {"industry", a.industry},
                   {"teleworkable", a.teleworkable},
                   {"agenda", std::move(agenda)}});
  }
  json doc;
  doc["zones"] = pop.zones;
  doc["agents"] = std::move(arr);
  return doc.dump(1);
}

population population_from_json(std::string const& text,
                                 std::string const& source) {
  population pop;
  try {
    auto const doc = json::parse(text);
    auto const& agents = doc.is_object() ? doc.at("agents") : doc;
    if (!agents.is_array()) {
      throw parse_error{source, "population must be a JSON array of agents"};
    }
    if (doc.is_object() && doc.contains("zones")) {
      for (auto const& z : doc.at("zones")) {
        pop.zones.push_back(z.get<std::string>());
      }
    }
    std::set<std::string> zones;
    for (auto const& ja : agents) {
      agent a;
      a.id = ja.at("id").get<std::string>();
      a.home_zone = ja.at("home_zone").get<std::string>();
      a.industry = ja.value("industry", std::string{});
      a.teleworkable = ja.value("teleworkable", false);
      zones.insert(a.home_zone);
      for (auto const& jact : ja.at("agenda")) {
        activity act;
        auto const kind = jact.at("kind").get<std::string>();
        auto const k = parse_activity_kind(kind);
        if (!k) {
          throw parse_error{source, fmt::format("agent '{}': unknown activity "
                                                "kind '{}'",
                                                a.id, kind)};
        }
        act.kind = *k;
        act.zone = jact.at("zone").get<std::string>();
        act.node = jact.at("node").get<std::string>();
        act.end_time = jact.at("end_time").get<seconds_t>();
        zones.insert(act.zone);
        a.agenda.push_back(std::move(act));
      }
      pop.agents.push_back(std::move(a));
    }
    for (auto const& z : pop.zones) {
      zones.erase(z);
    }
    pop.zones.insert(end(pop.zones), begin(zones), end(zones));
  } catch (json::exception const& e) {
    throw parse_error{source, e.what()};
  }
  try {
    check_population(pop);
  } catch (parse_error const&) {
    throw;
  } catch (error const& e) {
    throw parse_error{source, e.what()};
  }
  return pop;
}

population load_population(fs::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw parse_error{path.string(), "cannot open file"};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return population_from_json(ss.str(), path.string());
}

void write_population(population const& pop, fs::path const& path) {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw error{fmt::format("cannot write {}", path.string())};
  }
  out << population_to_json(pop) << '\n';
}

}  // namespace covsim
