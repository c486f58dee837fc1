#include "covsim/choice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fmt/core.h"
#include "json.hpp"

#include "covsim/calibrate.hpp"

using json = nlohmann::json;

namespace covsim {

void check_params(mnl_params const& p) {
  if (p.asc_of(p.reference_mode) != 0.0) {
    throw error{fmt::format("asc of reference mode '{}' must be 0, got {}",
                            to_string(p.reference_mode),
                            p.asc_of(p.reference_mode))};
  }
  if (p.beta_time > 0.0 || p.beta_cost > 0.0) {
    throw error{"beta_time and beta_cost must be <= 0"};
  }
  for (auto const a : p.asc) {
    if (!std::isfinite(a)) {
      throw error{"non-finite alternative-specific constant"};
    }
  }
}

std::string mnl_params_to_json(mnl_params const& p) {
  json asc = json::object();
  for (auto const m : kAllModes) {
    asc[std::string{to_string(m)}] = p.asc_of(m);
  }
  json doc = {{"asc", asc},
              {"beta_time", p.beta_time},
              {"beta_cost", p.beta_cost},
              {"reference_mode", to_string(p.reference_mode)}};
  return doc.dump(2);
}

mnl_params mnl_params_from_json(std::string const& text,
                                std::string const& source) {
  mnl_params p;
  try {
    auto const parsed = json::parse(text);
    // Calibration results nest the parameters under "params".
    auto const& doc = parsed.contains("params") ? parsed.at("params") : parsed;
    for (auto const& [k, v] : doc.at("asc").items()) {
      auto const m = parse_mode(k);
      if (!m) {
        throw parse_error{source, fmt::format("unknown mode '{}'", k)};
      }
      p.asc_of(*m) = v.get<double>();
    }
    p.beta_time = doc.at("beta_time").get<double>();
    p.beta_cost = doc.at("beta_cost").get<double>();
    auto const ref = doc.value("reference_mode", std::string{"car"});
    auto const m = parse_mode(ref);
    if (!m) {
      throw parse_error{source, fmt::format("unknown reference mode '{}'", ref)};
    }
    p.reference_mode = *m;
  } catch (json::exception const& e) {
    throw parse_error{source, e.what()};
  }
  try {
    check_params(p);
  } catch (parse_error const&) {
    throw;
  } catch (error const& e) {
    throw parse_error{source, e.what()};
  }
  return p;
}

double utility(mode const m, trip_context const& ctx, mnl_params const& p) {
  if (!ctx.available.contains(m)) {
    throw error{fmt::format("mode '{}' is not available", to_string(m))};
  }
  auto const i = index_of(m);
  return p.asc[i] + p.beta_time * ctx.time_h[i] + p.beta_cost * ctx.cost[i];
}

mode_values mnl_probabilities(trip_context const& ctx, mnl_params const& p) {
  if (ctx.available.empty()) {
    throw error{"no mode available"};
  }
  mode_values v{};
  auto vmax = -std::numeric_limits<double>::infinity();
  for (auto const m : kAllModes) {
    if (ctx.available.contains(m)) {
      v[index_of(m)] = utility(m, ctx, p);
      vmax = std::max(vmax, v[index_of(m)]);
    }
  }
  mode_values out{};
  double sum = 0.0;
  for (auto const m : kAllModes) {
    if (ctx.available.contains(m)) {
      out[index_of(m)] = std::exp(v[index_of(m)] - vmax);
      sum += out[index_of(m)];
    }
  }
  for (auto& x : out) {
    x /= sum;
  }
  return out;
}

void check_nested(nested_params const& p) {
  mode_set seen;
  for (auto const& n : p.nests) {
    if (!(n.mu > 0.0 && n.mu <= 1.0)) {
      throw error{fmt::format("nest '{}': mu must be in (0, 1], got {}",
                              n.name, n.mu)};
    }
    if (!(seen & n.modes).empty()) {
      throw error{fmt::format("nest '{}' overlaps another nest", n.name)};
    }
    for (auto const m : kAllModes) {
      if (n.modes.contains(m)) {
        seen.insert(m);
      }
    }
  }
  if (!(seen == mode_set::all())) {
    throw error{"nests must cover every mode"};
  }
}

mode_values nested_probabilities(trip_context const& ctx,
                                 nested_params const& p) {
  if (ctx.available.empty()) {
    throw error{"no mode available"};
  }
  struct nest_eval {
    double mu;
    double scaled_max;
    double sum;
    double inclusive;  // mu * logsum
  };
  std::vector<nest_eval> evals;
  std::vector<nest const*> used;
  for (auto const& n : p.nests) {
    auto const avail = n.modes & ctx.available;
    if (avail.empty()) {
      continue;
    }
    auto vmax = -std::numeric_limits<double>::infinity();
    for (auto const m : kAllModes) {
      if (avail.contains(m)) {
        vmax = std::max(vmax, utility(m, ctx, p.base) / n.mu);
      }
    }
    double sum = 0.0;
    for (auto const m : kAllModes) {
      if (avail.contains(m)) {
        sum += std::exp(utility(m, ctx, p.base) / n.mu - vmax);
      }
    }
    evals.push_back({n.mu, vmax, sum, n.mu * (vmax + std::log(sum))});
    used.push_back(&n);
  }
  auto wmax = -std::numeric_limits<double>::infinity();
  for (auto const& e : evals) {
    wmax = std::max(wmax, e.inclusive);
  }
  double denom = 0.0;
  for (auto const& e : evals) {
    denom += std::exp(e.inclusive - wmax);
  }
  mode_values out{};
  for (std::size_t k = 0; k < evals.size(); ++k) {
    auto const& e = evals[k];
    auto const p_nest = std::exp(e.inclusive - wmax) / denom;
    auto const avail = used[k]->modes & ctx.available;
    for (auto const m : kAllModes) {
      if (avail.contains(m)) {
        out[index_of(m)] =
            p_nest * std::exp(utility(m, ctx, p.base) / e.mu - e.scaled_max) /
            e.sum;
      }
    }
  }
  return out;
}

namespace {

template <typename ProbFn>
mode_values average_shares(std::span<trip_context const> sample,
                           ProbFn&& probs) {
  if (sample.empty()) {
    throw error{"empty trip sample"};
  }
  mode_values acc{};
  for (auto const& ctx : sample) {
    auto const p = probs(ctx);
    for (std::size_t i = 0; i < kModeCount; ++i) {
      acc[i] += p[i];
    }
  }
  for (auto& x : acc) {
    x /= static_cast<double>(sample.size());
  }
  return acc;
}

}  // namespace

mode_values average_mnl_shares(std::span<trip_context const> sample,
                               mnl_params const& p) {
  return average_shares(
      sample, [&](trip_context const& c) { return mnl_probabilities(c, p); });
}

mode_values average_nested_shares(std::span<trip_context const> sample,
                                  nested_params const& p) {
  return average_shares(
      sample, [&](trip_context const& c) { return nested_probabilities(c, p); });
}

mnl_params flatten_nested(nested_params const& p,
                          std::span<trip_context const> sample,
                          flatten_options const& opt) {
  check_nested(p);
  if (sample.empty()) {
    throw error{"flatten_nested: empty trip sample"};
  }
  auto const target = average_nested_shares(sample, p);
  calibration_targets targets;
  for (auto const m : kAllModes) {
    if (target[index_of(m)] > 0.0) {
      targets.values[fmt::format("{}_share", to_string(m))] =
          target[index_of(m)];
    }
  }
  calibration_options copt;
  copt.tol_pp = opt.tol_pp;
  copt.max_iter = opt.max_iter;
  copt.anchors.clear();
  auto const res = calibrate_ascs(
      p.base, targets,
      [&](mnl_params const& candidate) {
        sim_outcome o;
        o.shares = average_mnl_shares(sample, candidate);
        return o;
      },
      copt);
  if (!res.converged) {
    std::string detail;
    for (auto const& [k, v] : res.residuals) {
      detail += fmt::format(" {}={:+.4f}", k, v);
    }
    throw error{fmt::format(
        "flatten_nested did not converge after {} iterations; residuals:{}",
        res.iterations, detail)};
  }
  return res.params;
}

mode choose_mode(trip_context const& ctx, mnl_params const& p, rng_t& rng) {
  auto const probs = mnl_probabilities(ctx, p);
  auto const u = uniform01(rng);
  double acc = 0.0;
  std::optional<mode> last;
  for (auto const m : kAllModes) {
    if (!ctx.available.contains(m)) {
      continue;
    }
    acc += probs[index_of(m)];
    last = m;
    if (u < acc) {
      return m;
    }
  }
  return *last;
}

mode_values mode_share(std::span<mode const> trips) {
  if (trips.empty()) {
    throw error{"mode_share: empty trip list"};
  }
  mode_values out{};
  for (auto const m : trips) {
    out[index_of(m)] += 1.0;
  }
  for (auto& x : out) {
    x /= static_cast<double>(trips.size());
  }
  return out;
}

}  // namespace covsim
