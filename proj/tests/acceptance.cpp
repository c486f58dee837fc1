#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fmt/format.h"

#include "cli.hpp"
#include "covsim/calibrate.hpp"
#include "covsim/choice.hpp"
#include "covsim/engine.hpp"
#include "covsim/netio.hpp"
#include "covsim/population.hpp"
#include "covsim/scenario.hpp"
#include "covsim/sociability.hpp"
#include "covsim/toy_city.hpp"

#include "fixtures.hpp"

using namespace covsim;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kMnlFreqTol = 0.01;
constexpr int kMnlDraws = 100'000;
constexpr double kMnlMaxSeconds = 10.0;
constexpr double kFlattenIdentityTol = 1e-9;
constexpr double kFlattenShareTol = 0.005;
constexpr double kOracleResidualTol = 0.001;
constexpr double kToyCalibrationTolPp = 1.0;
constexpr double kTransitReduction = 0.16;
constexpr double kFitErrorTol = 1e-12;
constexpr double kMatrixMaxSeconds = 300.0;
constexpr double kPairDistanceTol = 1e-9;
constexpr double kSafetyRateTol = 1e-9;

using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point const start) {
  return std::chrono::duration<double>(clock_type::now() - start).count();
}

struct check {
  bool ok{true};
  std::vector<std::string> notes;

  void require(bool const cond, std::string const& what) {
    if (!cond) {
      ok = false;
      notes.push_back("failed: " + what);
    }
  }
  void note(std::string s) { notes.push_back(std::move(s)); }
};

void report(int const id, std::string const& title, check const& c) {
  std::string detail;
  for (auto const& n : c.notes) {
    detail += (detail.empty() ? "" : "; ") + n;
  }
  fmt::print("{} {} {}: {}\n", c.ok ? "PASS" : "FAIL", id, title, detail);
  std::fflush(stdout);
}

// ---- shared toy matrix ------------------------------------------------------

struct toy_runs {
  scenario_assets assets = toy::assets();
  matrix_spec spec = toy::matrix();
  std::vector<matrix_row> rows;
  std::vector<matrix_row> rows_threaded;
  double seconds{0.0};

  matrix_row const& row(std::string const& name) const {
    return *std::find_if(begin(rows), end(rows),
                         [&](matrix_row const& r) { return r.report.name == name; });
  }
  double ratio(std::string const& name, mode const m) const {
    return row(name).vs_baseline.ratio[index_of(m)].value_or(-1.0);
  }
};

std::string modeshare_csv(std::vector<matrix_row> const& rows) {
  std::ostringstream out;
  write_modeshare_csv(out, rows);
  return out.str();
}

// ---- criteria -----------------------------------------------------------------

check mnl_correctness() {
  check c;
  auto const start = clock_type::now();
  rng_t rng{101};
  double worst = 0.0;
  for (int f = 0; f < 10; ++f) {
    auto const ctx = test::random_context(rng, 2);
    auto const params = test::random_params(rng);
    auto const p = mnl_probabilities(ctx, params);
    mode_values freq{};
    for (int i = 0; i < kMnlDraws; ++i) {
      freq[index_of(choose_mode(ctx, params, rng))] += 1.0 / kMnlDraws;
    }
    for (std::size_t k = 0; k < kModeCount; ++k) {
      worst = std::max(worst, std::abs(freq[k] - p[k]));
    }
  }
  c.require(worst <= kMnlFreqTol, "frequency within 1 pp");
  c.note(fmt::format("max |freq - p| = {:.4f} pp", 100 * worst));

  int translation_bad = 0;
  int monotone_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    auto const ctx = test::random_context(rng, 2);
    auto const params = test::random_params(rng);
    auto const p = mnl_probabilities(ctx, params);

    auto shifted = params;
    auto const delta = 20.0 * uniform01(rng) - 10.0;
    for (auto& a : shifted.asc) {
      a += delta;
    }
    auto const q = mnl_probabilities(ctx, shifted);
    for (std::size_t k = 0; k < kModeCount; ++k) {
      translation_bad += std::abs(p[k] - q[k]) > 1e-12 ? 1 : 0;
    }

    std::vector<mode> avail;
    for (auto const m : kAllModes) {
      if (ctx.available.contains(m)) {
        avail.push_back(m);
      }
    }
    auto const target = avail[uniform_below(rng, avail.size())];
    auto raised = params;
    raised.asc_of(target) += 0.01 + 2.0 * uniform01(rng);
    auto const r = mnl_probabilities(ctx, raised);
    for (auto const m : avail) {
      auto const k = index_of(m);
      auto const bad = m == target ? r[k] < p[k] : r[k] > p[k];
      monotone_bad += bad ? 1 : 0;
    }
  }
  c.require(translation_bad == 0, "translation invariance");
  c.require(monotone_bad == 0, "monotonicity");
  c.note(fmt::format("1000 property cases, {} translation and {} monotonicity "
                     "violations",
                     translation_bad, monotone_bad));

  auto const secs = seconds_since(start);
  c.require(secs < kMnlMaxSeconds, "runtime below 10 s");
  c.note(fmt::format("{:.2f} s", secs));
  return c;
}

check nested_flattening() {
  check c;
  rng_t rng{202};
  std::vector<trip_context> sample;
  for (int i = 0; i < 1000; ++i) {
    sample.push_back(test::random_context(rng, 1));
  }

  auto const unit = toy::nested(1.0);
  auto const flat_unit = flatten_nested(unit, sample);
  double asc_diff = 0.0;
  for (std::size_t k = 0; k < kModeCount; ++k) {
    asc_diff = std::max(asc_diff, std::abs(flat_unit.asc[k] - unit.base.asc[k]));
  }
  c.require(asc_diff <= kFlattenIdentityTol && flat_unit.beta_time == unit.base.beta_time &&
                flat_unit.beta_cost == unit.base.beta_cost,
            "identity at unit scales");
  c.note(fmt::format("mu=1 max asc change {:.2e}", asc_diff));

  auto const half = toy::nested(0.5);
  auto const flat = flatten_nested(half, sample);
  auto const a = average_nested_shares(sample, half);
  auto const b = average_mnl_shares(sample, flat);
  double worst = 0.0;
  for (std::size_t k = 0; k < kModeCount; ++k) {
    worst = std::max(worst, std::abs(a[k] - b[k]));
  }
  c.require(worst <= kFlattenShareTol, "mu=0.5 shares within 0.5 pp");
  c.note(fmt::format("mu=0.5 max share gap {:.4f} pp over 1000 trips", 100 * worst));
  return c;
}

check calibration(toy_runs const& toy) {
  check c;

  constexpr std::array four = {mode::car, mode::transit, mode::walk, mode::bike};
  rng_t rng{303};
  std::vector<trip_context> sample;
  for (int i = 0; i < 50; ++i) {
    auto ctx = test::random_context(rng);
    ctx.available = {mode::car, mode::transit, mode::walk, mode::bike};
    sample.push_back(ctx);
  }
  simulate_fn const oracle = [&sample](mnl_params const& p) {
    sim_outcome out;
    out.shares = average_mnl_shares(sample, p);
    for (std::size_t k = 0; k < kModeCount; ++k) {
      out.trips[k] = 1000.0 * out.shares[k];
    }
    return out;
  };
  calibration_options opt;
  opt.tol_pp = 0.1;
  opt.max_iter = 50;
  int converged = 0;
  int max_iter = 0;
  double worst = 0.0;
  for (int start = 0; start < 100; ++start) {
    std::array<double, 4> w{};
    for (auto& x : w) {
      x = 0.05 + uniform01(rng);
    }
    auto const total = w[0] + w[1] + w[2] + w[3];
    calibration_targets t;
    for (std::size_t i = 0; i < four.size(); ++i) {
      t.values[std::string{to_string(four[i])} + "_share"] = w[i] / total;
    }
    auto const res = calibrate_ascs(test::random_params(rng), t, oracle, opt);
    converged += res.converged ? 1 : 0;
    max_iter = std::max(max_iter, res.iterations);
    for (auto const& [name, r] : res.residuals) {
      worst = std::max(worst, std::abs(r));
    }
  }
  c.require(converged == 100 && worst < kOracleResidualTol && max_iter <= 50,
            "analytic oracle from 100 random starts");
  c.note(fmt::format("oracle: {}/100 converged, max residual {:.4f} pp, max {} "
                     "iterations",
                     converged, 100 * worst, max_iter));

  auto const pre_share = toy.row("precovid").report.shares[index_of(mode::transit)];
  calibration_targets t;
  t.values = {{"transit_share", pre_share - kTransitReduction}};
  calibration_options toy_opt;
  toy_opt.tol_pp = kToyCalibrationTolPp;
  auto const base = toy::precovid_params();
  auto const cfg = scenario_config::make("calibrate", phase::covid, 1.0, 7);
  auto const res =
      calibrate_ascs(base, t, scenario_simulator(cfg, toy.assets, toy.spec.sim), toy_opt);
  auto const residual = res.residuals.at("transit_share");
  auto const d_asc = res.params.asc_of(mode::transit) - base.asc_of(mode::transit);
  c.require(res.converged && std::abs(residual) <= kToyCalibrationTolPp / 100 &&
                d_asc < 0.0,
            "toy 16 pp transit reduction");
  c.note(fmt::format("toy: target {:.4f}, residual {:+.2f} pp after {} iterations, "
                     "transit asc {:+.3f}",
                     pre_share - kTransitReduction, 100 * residual, res.iterations,
                     d_asc));

  calibration_targets fe;
  fe.values = {{"transit_trips_ratio", 0.80}, {"car_trips_ratio", 0.70}};
  auto const err =
      fit_error({{"transit_trips_ratio", 0.90}, {"car_trips_ratio", 0.60}}, fe);
  c.require(std::abs(err - 0.10) <= kFitErrorTol, "fit_error example");
  c.note(fmt::format("fit_error {:.17g}", err));
  return c;
}

check capacity(toy_runs const& toy) {
  check c;
  auto w = test::boarding_world(60, 100, 0.5);
  w.build_net();
  auto const res = run_mobsim(w.plans, w.pop, *w.net, w.cfg);
  auto const boarded = std::count_if(begin(res.events), end(res.events), [](event const& e) {
    return e.kind == event_kind::board && e.t < 12 * 3600;
  });
  c.require(boarded == 50, "boarding fixture boards 50");
  c.note(fmt::format("fixture boarded {}", boarded));

  std::string trips;
  for (auto const* p : {"covid", "p1", "p2", "p3", "p4"}) {
    auto const s1 = toy.row(p).report.trips[index_of(mode::transit)];
    auto const s2 = toy.row(std::string{"s2_"} + p).report.trips[index_of(mode::transit)];
    c.require(s2 <= s1, fmt::format("S2 <= S1 transit trips in {}", p));
    trips += fmt::format("{} {}/{} ", p, s2, s1);
  }
  c.note("S2/S1 transit trips " + trips);
  auto const r1 = toy.ratio("p4", mode::transit);
  auto const r2 = toy.ratio("s2_p4", mode::transit);
  c.require(r2 < r1, "S2 p4 transit ratio below S1");
  c.note(fmt::format("p4 transit ratio S1 {:.3f} S2 {:.3f}", r1, r2));

  // Onboard peaks need the transit legs of the final plans, so the scenarios
  // are replayed through evolve with the same inputs as run_scenario.
  int worst_excess = std::numeric_limits<int>::min();
  bool same_events = true;
  for (auto const& cfg : toy.spec.scenarios) {
    auto sim = toy.spec.sim;
    sim.capacity_factor = cfg.capacity_factor;
    auto const pop = cfg.ph == phase::precovid
                         ? toy.assets.pop
                         : apply_wfh(toy.assets.pop, toy.assets.returns, cfg.ph, cfg.seed).pop;
    sim_network const net{toy.assets.road, toy.assets.schedules.get(cfg.schedule_variant),
                          sim};
    auto const run = evolve(pop, net, toy.assets.params.at(cfg.choice_params), sim, cfg.seed);
    same_events = same_events && run.events == toy.row(cfg.name).events;
    auto const limit =
        static_cast<int>(std::floor(toy::kVehicleCapacity * cfg.capacity_factor));
    for (auto const& [trip, peak] : test::onboard_peaks(run.events, run.plans, net)) {
      worst_excess = std::max(worst_excess, peak - limit);
    }
  }
  c.require(same_events, "replayed events match the matrix run");
  c.require(worst_excess <= 0, "onboard peaks within floor(capacity x factor)");
  c.note(fmt::format("max peak minus limit {}", worst_excess));
  return c;
}

check reopening(toy_runs const& toy) {
  check c;
  std::vector<double> ratios;
  std::string text;
  for (auto const* p : {"covid", "p1", "p2", "p3", "p4"}) {
    ratios.push_back(toy.ratio(p, mode::transit));
    text += fmt::format("{} {:.3f} ", p, ratios.back());
  }
  auto strictly = true;
  for (std::size_t i = 1; i < ratios.size(); ++i) {
    strictly = strictly && ratios[i - 1] < ratios[i];
  }
  c.require(strictly && ratios.back() < 1.0, "transit ratio strictly rising below 1");
  c.note("transit ratio " + text);
  auto const car = toy.ratio("p4", mode::car);
  c.require(car > 1.0, "car ratio above 1 in p4");
  auto const b1 = toy.ratio("p4", mode::bike);
  auto const b2 = toy.ratio("s2_p4", mode::bike);
  c.require(b2 >= b1, "bike ratio S2 >= S1 in p4");
  c.note(fmt::format("p4 car {:.3f}, bike S1 {:.3f} S2 {:.3f}", car, b1, b2));
  return c;
}

check wfh(toy_runs const& toy) {
  check c;
  population pop;
  pop.zones = {"z"};
  for (int i = 0; i < 100; ++i) {
    auto a = test::make_agent(fmt::format("w{:03}", i), "z",
                              {{"h", 8 * 3600}, {"o", 17 * 3600}, {"h", kDayEnd}},
                              {activity_kind::home, activity_kind::work, activity_kind::home});
    a.industry = "office";
    a.teleworkable = i < 44;
    pop.agents.push_back(std::move(a));
  }
  auto const covid = apply_wfh(pop, toy::returns(), phase::covid, 11);
  auto const rate = wfh_rate(pop, covid.pop);
  c.require(rate == 0.44, "wfh_rate 0.44 exactly");
  c.note(fmt::format("wfh_rate {:.17g}", rate));

  auto const commuters = [](population const& p) {
    return std::count_if(begin(p.agents), end(p.agents),
                         [](agent const& a) { return a.has_work(); });
  };
  std::vector<std::ptrdiff_t> counts{
      commuters(apply_wfh(toy.assets.pop, toy.assets.returns, phase::covid, 7).pop)};
  for (auto const p : {phase::p1, phase::p2, phase::p3, phase::p4}) {
    counts.push_back(commuters(apply_wfh(toy.assets.pop, toy.assets.returns, p, 7).pop));
  }
  counts.push_back(commuters(toy.assets.pop));
  c.require(std::is_sorted(begin(counts), end(counts)), "commuters monotone over phases");
  c.note(fmt::format("toy commuters covid..p4, precovid: {}", fmt::join(counts, " ")));
  return c;
}

check engine(toy_runs const& toy) {
  check c;
  std::vector<std::string> failed;
  auto const fixture = [&](std::string const& name, test::world& w) {
    w.build_net();
    auto const res = run_mobsim(w.plans, w.pop, *w.net, w.cfg);
    auto const cons = test::check_conservation(res.events, res.stats, w.road.links.size());
    if (!cons.ok()) {
      failed.push_back(name + " " + cons.detail);
    }
  };
  auto boarding = test::boarding_world(60, 100, 0.5);
  fixture("boarding", boarding);
  auto congested = test::car_world(300, 1, 360.0);
  fixture("congestion", congested);
  auto slow = test::car_world(3, 0);
  slow.road.links[0].freespeed_mps = 0.01;
  slow.plan_all(mode::car);
  fixture("end_of_day", slow);
  for (auto const& r : toy.rows) {
    auto const cons =
        test::check_conservation(r.events, r.stats.back(), toy.assets.road.links.size());
    if (!cons.ok()) {
      failed.push_back(r.report.name + " " + cons.detail);
    }
    auto const& s = r.stats.back();
    for (std::size_t k = 0; k < kModeCount; ++k) {
      if (s.planned[k] != s.arrived[k] + s.stuck[k] + s.denied_terminated[k]) {
        failed.push_back(r.report.name + " stats identity");
      }
    }
  }
  c.require(failed.empty(), "trip and link conservation");
  c.note(fmt::format("conservation on 3 fixtures and {} toy scenarios{}", toy.rows.size(),
                     failed.empty() ? "" : ": " + fmt::format("{}", fmt::join(failed, ", "))));

  auto same = toy.rows.size() == toy.rows_threaded.size();
  for (std::size_t i = 0; same && i < toy.rows.size(); ++i) {
    same = toy.rows[i].events == toy.rows_threaded[i].events &&
           toy.rows[i].stats == toy.rows_threaded[i].stats;
  }
  same = same && modeshare_csv(toy.rows) == modeshare_csv(toy.rows_threaded);
  c.require(same, "identical events and modeshare.csv for 1 and 4 threads");
  c.note(fmt::format("threads 1 vs 4 identical: {}", same));

  c.require(toy.seconds < kMatrixMaxSeconds, "toy matrix under 5 minutes");
  c.note(fmt::format("toy matrix {} scenarios x {} iterations in {:.1f} s",
                     toy.spec.scenarios.size(), toy.spec.sim.iterations, toy.seconds));
  return c;
}

check sociability() {
  check c;
  rng_t rng{808};
  int mismatches = 0;
  int scale_bad = 0;
  for (int i = 0; i < 1000; ++i) {
    detection_frame f{"cam", i, {}};
    auto const n = uniform_below(rng, 51);
    for (std::uint64_t k = 0; k < n; ++k) {
      auto const cls = uniform01(rng) < 0.8 ? object_class::person : object_class::car;
      f.objects.push_back({cls, {1920 * uniform01(rng), 1080 * uniform01(rng),
                                 5 + 50 * uniform01(rng), 20 + 180 * uniform01(rng)}});
    }
    std::vector<bbox> persons;
    for (auto const& d : f.objects) {
      if (d.cls == object_class::person) {
        persons.push_back(d.box);
      }
    }
    std::size_t pairs = 0;
    std::size_t violations = 0;
    for (std::size_t a = 0; a < persons.size(); ++a) {
      for (std::size_t b = a + 1; b < persons.size(); ++b) {
        auto const& p = persons[a];
        auto const& q = persons[b];
        auto const dist = std::hypot(p.x + p.w / 2 - q.x - q.w / 2, p.y + p.h / 2 - q.y - q.h / 2);
        auto const feet = dist * (1.70 / p.h + 1.70 / q.h) / 2 * 3.28084;
        ++pairs;
        violations += feet < 6.0 ? 1U : 0U;
      }
    }
    auto const got = frame_pairs(f);
    auto const got_v = static_cast<std::size_t>(std::count_if(
        begin(got), end(got), [](pair_measure const& p) { return p.violation; }));
    mismatches += got.size() != pairs || got_v != violations ? 1 : 0;

    for (auto const s : {0.5, 2.0, 10.0}) {
      auto g = f;
      for (auto& d : g.objects) {
        d.box = {d.box.x * s, d.box.y * s, d.box.w * s, d.box.h * s};
      }
      auto const scaled = frame_pairs(g);
      for (std::size_t k = 0; k < got.size(); ++k) {
        scale_bad += std::abs(scaled[k].distance_ft - got[k].distance_ft) >
                             1e-9 * std::max(1.0, got[k].distance_ft)
                         ? 1
                         : 0;
      }
    }
  }
  c.require(mismatches == 0, "brute-force oracle on 1000 frames");
  c.require(scale_bad == 0, "scale invariance");
  c.note(fmt::format("{} oracle mismatches, {} scale violations", mismatches, scale_bad));

  bbox const a{0, 0, 50, 100};
  auto const d100 = pair_distance_ft(a, {100, 0, 50, 100});
  auto const d120 = pair_distance_ft(a, {120, 0, 50, 100});
  c.require(std::abs(d100 - 5.577428) < 1e-6 && std::abs(d100 - 100 * 0.017 * 3.28084) <=
                                                    kPairDistanceTol,
            "100 px example");
  c.require(std::abs(d120 - 120 * 0.017 * 3.28084) <= kPairDistanceTol && d120 >= 6.0,
            "120 px example");
  c.note(fmt::format("examples {:.9f} ft and {:.9f} ft", d100, d120));

  std::vector<detection_frame> stream;
  for (int i = 0; i < 100; ++i) {
    auto const gap = i < 9 ? 50.0 : 400.0;
    stream.push_back({"c", i * 30,
                      {{object_class::person, {0, 0, 40, 100}},
                       {object_class::person, {gap, 0, 40, 100}}}});
  }
  auto const rep = aggregate(stream);
  c.require(rep.safety_rate && std::abs(*rep.safety_rate - 0.91) <= kSafetyRateTol,
            "constructed stream safety rate 0.91");
  c.note(fmt::format("safety rate {:.12f}", rep.safety_rate.value_or(-1)));

  std::vector<detection_frame> frames;
  std::int64_t t = 0;
  for (int i = 0; i < 2000; ++i) {
    t += static_cast<std::int64_t>(uniform_below(rng, 300));
    detection_frame f{"c", t, {}};
    auto const n = uniform_below(rng, 12);
    for (std::uint64_t k = 0; k < n; ++k) {
      f.objects.push_back({kAllClasses[uniform_below(rng, kClassCount)], {0, 0, 10, 10}});
    }
    frames.push_back(std::move(f));
  }
  auto const profile = make_temporal_profile(frames, -5.0);
  auto conserved = true;
  for (auto const cls : kAllClasses) {
    std::int64_t total = 0;
    for (auto const& f : frames) {
      total += std::count_if(begin(f.objects), end(f.objects),
                             [&](detection const& d) { return d.cls == cls; });
    }
    std::int64_t bucketed = 0;
    for (int h = 0; h < 24; ++h) {
      bucketed += profile.totals[h][static_cast<std::size_t>(cls)];
      if (auto const m = profile.mean(cls, h)) {
        conserved = conserved &&
                    std::llround(*m * static_cast<double>(profile.frames[h])) ==
                        profile.totals[h][static_cast<std::size_t>(cls)];
      }
    }
    conserved = conserved && bucketed == total;
  }
  c.require(conserved, "temporal profile conservation");
  return c;
}

check parsers() {
  check c;
  auto lossless = true;
  auto const round_trip = [&](transit_schedule const& s) {
    test::temp_dir const tmp;
    write_gtfs_subset(s, tmp.path());
    lossless = lossless && load_gtfs_subset(tmp.path()) == s;
  };
  round_trip(load_gtfs_subset(test::fixture("gtfs/basic")));
  round_trip(load_gtfs_subset(test::fixture("gtfs/far_stop")));
  round_trip(toy::schedule(toy::kRegularHeadway));
  c.require(lossless, "GTFS round trip");

  auto const reference = load_gtfs_subset(test::fixture("gtfs/calendar"));
  auto const text = test::read_text(test::fixture("gtfs/calendar/stop_times.txt"));
  auto const split = text.find('\n');
  std::vector<std::string> rows;
  std::istringstream in{text.substr(split + 1)};
  for (std::string line; std::getline(in, line);) {
    rows.push_back(line);
  }
  std::mt19937_64 rng{909};
  auto shuffled_ok = true;
  for (int round = 0; round < 20; ++round) {
    std::shuffle(begin(rows), end(rows), rng);
    test::temp_dir const tmp;
    for (auto const* f : {"stops.txt", "routes.txt", "trips.txt", "calendar.txt"}) {
      fs::copy_file(test::fixture("gtfs/calendar") / f, tmp / f);
    }
    std::string body = text.substr(0, split + 1);
    for (auto const& r : rows) {
      body += r + "\n";
    }
    test::write_text(tmp / "stop_times.txt", body);
    shuffled_ok = shuffled_ok && load_gtfs_subset(tmp.path()) == reference;
  }
  c.require(shuffled_ok, "shuffled stop_times load identically");

  struct cli_case {
    std::vector<std::string> args;
    int code;
    std::string needle;
  };
  auto const fx = [](std::string const& rel) { return test::fixture(rel).string(); };
  auto const net_args = [&](std::string const& net, std::string const& gtfs) {
    return std::vector<std::string>{"net",   "--nodes", fx("netio/" + net + "/nodes.csv"),
                                    "--links", fx("netio/" + net + "/links.csv"),
                                    "--gtfs",  fx("gtfs/" + gtfs)};
  };
  test::temp_dir const out;
  std::vector<cli_case> const cases = {
      {net_args("dangling", "basic"), cli::kInputError, "links.csv:3:"},
      {net_args("bad_number", "basic"), cli::kInputError, "links.csv:3:"},
      {net_args("corridor", "nonincreasing"), cli::kInputError, "stop_times.txt:4:"},
      {net_args("corridor", "unknown_stop"), cli::kInputError, "stop_times.txt:3:"},
      {net_args("corridor", "missing"), cli::kInputError, "stop_times.txt"},
      {net_args("corridor", "basic"), cli::kOk, ""},
      {{"sociability", "--frames", fx("sociability/bad_class.jsonl"), "--out",
        (out / "r.json").string()},
       cli::kInputError,
       "bad_class.jsonl:2:"}};
  int wrong = 0;
  for (auto const& k : cases) {
    std::vector<char const*> argv{"covsim"};
    for (auto const& a : k.args) {
      argv.push_back(a.c_str());
    }
    std::ostringstream o;
    std::ostringstream e;
    auto const code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
    if (code != k.code || e.str().find(k.needle) == std::string::npos) {
      ++wrong;
      c.note(fmt::format("{} {} -> {} '{}'", k.args[0], k.args.back(), code, e.str()));
    }
  }
  c.require(wrong == 0, "malformed inputs give exit 1 with line numbers");
  c.note(fmt::format("{} CLI cases, {} wrong", cases.size(), wrong));
  return c;
}

}  // namespace

int main() {
  bool all = true;
  auto const run = [&](int const id, std::string const& title, auto&& fn) {
    try {
      auto const c = fn();
      report(id, title, c);
      all = all && c.ok;
    } catch (std::exception const& e) {
      check c;
      c.require(false, e.what());
      report(id, title, c);
      all = false;
    }
  };

  run(1, "MNL correctness", mnl_correctness);
  run(2, "nested flattening", nested_flattening);

  toy_runs toy;
  auto const start = clock_type::now();
  toy.rows = run_matrix(toy.spec.scenarios, toy.assets, toy.spec.sim);
  toy.seconds = seconds_since(start);
  auto threaded = toy.spec.sim;
  threaded.threads = 4;
  toy.rows_threaded = run_matrix(toy.spec.scenarios, toy.assets, threaded);

  run(3, "calibration", [&] { return calibration(toy); });
  run(4, "capacity restriction", [&] { return capacity(toy); });
  run(5, "reopening direction", [&] { return reopening(toy); });
  run(6, "work from home", [&] { return wfh(toy); });
  run(7, "engine conservation and determinism", [&] { return engine(toy); });
  run(8, "sociability", sociability);
  run(9, "parsers", parsers);
  return all ? 0 : 1;
}
