#include <numeric>

#include "fmt/core.h"

#include "covsim/engine.hpp"

#include "parallel.hpp"

namespace covsim {

namespace {

rng_t agent_rng(std::uint64_t const seed, std::string const& id,
                int const iteration) {
  return rng_t{mix(mix(seed, fnv1a(id)), static_cast<std::uint64_t>(iteration))};
}

std::size_t tour_count(std::vector<trip_plan> const& trips) {
  return trips.empty() ? 0 : trips.back().tour + 1;
}

// Chooses a mode per tour. When `experienced` is given, the executed mode's
// time is the one observed in the last iteration.
void choose_tours(agent_plan& plan, sim_network const& net,
                  mnl_params const& params, sim_config const& cfg,
                  travel_feedback const& fb, rng_t& rng,
                  std::vector<trip_outcome> const* experienced) {
  auto const tours = tour_count(plan.trips);
  std::vector<mode> previous = plan.tour_modes;
  plan.tour_modes.assign(tours, mode::walk);
  for (std::size_t tour = 0; tour < tours; ++tour) {
    auto ctx = tour_context(plan.trips, tour, net, cfg, fb);
    if (experienced != nullptr && tour < previous.size() &&
        ctx.available.contains(previous[tour])) {
      double hours = 0.0;
      for (std::size_t k = 0; k < plan.trips.size(); ++k) {
        if (plan.trips[k].tour == tour) {
          auto const& o = (*experienced)[k];
          hours += (o.end - o.depart) / 3600.0;
        }
      }
      ctx.time_h[index_of(previous[tour])] = hours;
    }
    plan.tour_modes[tour] =
        ctx.available.empty() ? mode::walk : choose_mode(ctx, params, rng);
  }
}

}  // namespace

std::vector<agent_plan> make_initial_plans(population const& pop,
                                           sim_network const& net,
                                           mnl_params const& params,
                                           sim_config const& cfg,
                                           std::uint64_t const seed) {
  cfg.check();
  check_params(params);
  travel_feedback const free_flow;
  std::vector<agent_plan> plans(pop.agents.size());
  detail::parallel_for(pop.agents.size(), cfg.threads, [&](std::size_t i) {
    auto const& a = pop.agents[i];
    auto& plan = plans[i];
    plan.agent = i;
    plan.trips = agenda_trips(a, net.road());
    auto rng = agent_rng(seed, a.id, 0);
    choose_tours(plan, net, params, cfg, free_flow, rng, nullptr);
    route_plan(plan, net, cfg, free_flow);
  });
  return plans;
}

evolve_result evolve(population const& pop, sim_network const& net,
                     mnl_params const& params, sim_config const& cfg,
                     std::uint64_t const seed,
                     std::vector<agent_plan> plans) {
  cfg.check();
  check_params(params);
  evolve_result res;
  travel_feedback fb;
  for (int it = 0; it < cfg.iterations; ++it) {
    if (it > 0) {
      auto const replan_seed = mix(seed, static_cast<std::uint64_t>(it));
      detail::parallel_for(plans.size(), cfg.threads, [&](std::size_t i) {
        auto& plan = plans[i];
        auto const& id = pop.agents[plan.agent].id;
        if (keyed_uniform(id, replan_seed) >= cfg.replan_fraction) {
          return;
        }
        auto rng = agent_rng(seed, id, it);
        choose_tours(plan, net, params, cfg, fb, rng, &res.outcomes[i]);
        route_plan(plan, net, cfg, fb);
      });
    }

    auto mob = run_mobsim(plans, pop, net, cfg);
    auto scores = score_plans(mob.events, pop.agents.size(), cfg);
    mob.stats.iteration = it;
    mob.stats.avg_score =
        scores.empty() ? 0.0
                       : std::accumulate(begin(scores), end(scores), 0.0) /
                             static_cast<double>(scores.size());
    res.stats.push_back(mob.stats);
    fb = std::move(mob.feedback);
    res.outcomes = std::move(mob.outcomes);
    res.scores = std::move(scores);
    if (it + 1 == cfg.iterations) {
      res.events = std::move(mob.events);
    }
  }
  res.plans = std::move(plans);
  return res;
}

evolve_result evolve(population const& pop, sim_network const& net,
                     mnl_params const& params, sim_config const& cfg,
                     std::uint64_t const seed) {
  return evolve(pop, net, params, cfg, seed,
                make_initial_plans(pop, net, params, cfg, seed));
}

}  // namespace covsim
