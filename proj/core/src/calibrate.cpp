#include "covsim/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fmt/core.h"
#include "json.hpp"

using json = nlohmann::json;

namespace covsim {

std::optional<observable> parse_observable(std::string_view name) {
  if (name == "subway_ridership_ratio") {
    return observable{mode::transit, observable_kind::trips_ratio};
  }
  auto const strip = [&](std::string_view suffix) -> std::optional<mode> {
    if (name.size() <= suffix.size() ||
        name.substr(name.size() - suffix.size()) != suffix) {
      return std::nullopt;
    }
    return parse_mode(name.substr(0, name.size() - suffix.size()));
  };
  if (auto const m = strip("_trips_ratio")) {
    return observable{*m, observable_kind::trips_ratio};
  }
  if (auto const m = strip("_share")) {
    return observable{*m, observable_kind::share};
  }
  return std::nullopt;
}

void check_targets(calibration_targets const& t) {
  if (t.values.empty()) {
    throw error{"calibration targets are empty"};
  }
  mode_set seen;
  for (auto const& [name, v] : t.values) {
    auto const obs = parse_observable(name);
    if (!obs) {
      throw error{fmt::format("unknown observable '{}'", name)};
    }
    auto const hi = obs->kind == observable_kind::share ? 1.0 : 2.0;
    if (!std::isfinite(v) || v <= 0.0 || v > hi) {
      throw error{fmt::format("target '{}' = {} outside (0, {}]", name, v, hi)};
    }
    if (seen.contains(obs->m)) {
      throw error{fmt::format("more than one target for mode '{}'",
                              to_string(obs->m))};
    }
    seen.insert(obs->m);
  }
}

calibration_targets targets_from_json(std::string const& text,
                                      std::string const& source) {
  calibration_targets t;
  try {
    auto const doc = json::parse(text);
    if (!doc.is_object()) {
      throw parse_error{source, "targets must be a JSON object"};
    }
    for (auto const& [k, v] : doc.items()) {
      if (!v.is_number()) {
        throw parse_error{source, fmt::format("target '{}' is not a number", k)};
      }
      t.values[k] = v.get<double>();
    }
  } catch (json::exception const& e) {
    throw parse_error{source, e.what()};
  }
  try {
    check_targets(t);
  } catch (parse_error const&) {
    throw;
  } catch (error const& e) {
    throw parse_error{source, e.what()};
  }
  return t;
}

calibration_targets load_targets(std::filesystem::path const& path) {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    throw parse_error{path.string(), "cannot open file"};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return targets_from_json(ss.str(), path.string());
}

namespace {

double total(mode_values const& v) {
  double s = 0.0;
  for (auto const x : v) {
    s += x;
  }
  return s;
}

struct evaluation {
  std::map<std::string, double> residuals;
  mode_values share_sim{};
  mode_values share_target{};
  double avg_abs{0.0};
  double max_abs_share_pp{0.0};
};

// Ratio targets are compared as shares of the baseline trip total so every
// observable feeds the same update rule.
evaluation evaluate(sim_outcome const& out, calibration_targets const& t,
                    std::optional<mode_values> const& baseline) {
  evaluation e;
  auto const base_total = baseline ? total(*baseline) : 0.0;
  for (auto const& [name, target] : t.values) {
    auto const obs = *parse_observable(name);
    auto const i = index_of(obs.m);
    double simulated = 0.0;
    if (obs.kind == observable_kind::share) {
      simulated = out.shares[i];
      e.share_sim[i] = simulated;
      e.share_target[i] = target;
    } else {
      if (!baseline || (*baseline)[i] <= 0.0) {
        throw error{fmt::format(
            "target '{}' needs a baseline with trips for mode '{}'", name,
            to_string(obs.m))};
      }
      simulated = out.trips[i] / (*baseline)[i];
      e.share_sim[i] = out.trips[i] / base_total;
      e.share_target[i] = target * (*baseline)[i] / base_total;
    }
    e.residuals[name] = simulated - target;
    e.avg_abs += std::abs(simulated - target);
    e.max_abs_share_pp = std::max(
        e.max_abs_share_pp, 100.0 * std::abs(e.share_sim[i] - e.share_target[i]));
  }
  e.avg_abs /= static_cast<double>(t.values.size());
  return e;
}

}  // namespace

std::map<std::string, double> observe(sim_outcome const& out,
                                      calibration_targets const& t,
                                      std::optional<mode_values> const&
                                          baseline_trips) {
  auto const e = evaluate(out, t, baseline_trips);
  std::map<std::string, double> values;
  for (auto const& [name, r] : e.residuals) {
    values[name] = t.values.at(name) + r;
  }
  return values;
}

calibration_result calibrate_ascs(mnl_params const& base,
                                  calibration_targets const& targets,
                                  simulate_fn const& simulate,
                                  calibration_options const& opt) {
  check_targets(targets);
  check_params(base);
  if (!(opt.step > 0.0) || opt.max_iter < 0) {
    throw error{"calibration step must be positive and max_iter >= 0"};
  }

  mode_set targeted;
  for (auto const& [name, v] : targets.values) {
    targeted.insert(parse_observable(name)->m);
  }

  calibration_result res;
  auto params = base;
  auto eval = evaluate(simulate(params), targets, opt.baseline_trips);
  res.history.push_back(eval.avg_abs);

  auto best_params = params;
  auto best_eval = eval;
  auto const tol = [&](evaluation const& e) {
    return e.max_abs_share_pp <= opt.tol_pp;
  };

  while (!tol(eval) && res.iterations < opt.max_iter) {
    mode_values delta{};
    for (auto const m : kAllModes) {
      if (!targeted.contains(m)) {
        continue;
      }
      auto const i = index_of(m);
      delta[i] = opt.step * std::log(eval.share_target[i] /
                                     std::max(eval.share_sim[i], opt.eps));
    }
    for (auto const& [follower, anchor] : opt.anchors) {
      if (!targeted.contains(follower) && targeted.contains(anchor)) {
        delta[index_of(follower)] = delta[index_of(anchor)];
      }
    }
    for (std::size_t i = 0; i < kModeCount; ++i) {
      params.asc[i] += delta[i];
    }
    auto const shift = params.asc_of(params.reference_mode);
    for (auto& a : params.asc) {
      a -= shift;
    }
    params.asc_of(params.reference_mode) = 0.0;

    ++res.iterations;
    eval = evaluate(simulate(params), targets, opt.baseline_trips);
    res.history.push_back(eval.avg_abs);
    if (eval.avg_abs < best_eval.avg_abs ||
        (tol(eval) && !tol(best_eval))) {
      best_params = params;
      best_eval = eval;
    }
  }

  res.params = best_params;
  res.converged = tol(best_eval);
  res.residuals = best_eval.residuals;
  res.avg_abs_residual = best_eval.avg_abs;
  return res;
}

double fit_error(std::map<std::string, double> const& simulated,
                 calibration_targets const& targets) {
  if (targets.values.empty()) {
    throw error{"fit_error: no targets"};
  }
  double sum = 0.0;
  for (auto const& [name, target] : targets.values) {
    auto const it = simulated.find(name);
    if (it == end(simulated)) {
      throw error{fmt::format("fit_error: observable '{}' missing from "
                              "simulated values",
                              name)};
    }
    sum += std::abs(it->second - target);
  }
  return sum / static_cast<double>(targets.values.size());
}

std::string calibration_result_to_json(calibration_result const& r) {
  json residuals = json::object();
  for (auto const& [k, v] : r.residuals) {
    residuals[k] = v;
  }
  json doc = {{"params", json::parse(mnl_params_to_json(r.params))},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"residuals", residuals},
              {"avg_abs_residual", r.avg_abs_residual},
              {"history", r.history}};
  return doc.dump(2);
}

}  // namespace covsim
