#include <cmath>

#include "gtest/gtest.h"

#include "covsim/calibrate.hpp"
#include "covsim/scenario.hpp"
#include "covsim/toy_city.hpp"

#include "fixtures.hpp"

using namespace covsim;

namespace {

constexpr std::array kFour = {mode::car, mode::transit, mode::walk, mode::bike};

std::vector<trip_context> four_mode_sample(std::uint64_t const seed) {
  rng_t rng{seed};
  std::vector<trip_context> sample;
  for (int i = 0; i < 50; ++i) {
    auto ctx = test::random_context(rng);
    ctx.available = {mode::car, mode::transit, mode::walk, mode::bike};
    sample.push_back(ctx);
  }
  return sample;
}

simulate_fn analytic(std::vector<trip_context> const& sample) {
  return [&sample](mnl_params const& p) {
    sim_outcome out;
    out.shares = average_mnl_shares(sample, p);
    for (std::size_t i = 0; i < kModeCount; ++i) {
      out.trips[i] = 1000.0 * out.shares[i];
    }
    return out;
  };
}

calibration_targets equal_four() {
  calibration_targets t;
  for (auto const m : kFour) {
    t.values[std::string{to_string(m)} + "_share"] = 0.25;
  }
  return t;
}

}  // namespace

TEST(fit_error, examples) {
  calibration_targets t;
  t.values = {{"transit_trips_ratio", 0.80}, {"car_trips_ratio", 0.70}};
  EXPECT_EQ(fit_error({{"transit_trips_ratio", 0.80}, {"car_trips_ratio", 0.70}}, t),
            0.0);
  // |0.90 - 0.80| and |0.60 - 0.70| are both 0.1 up to binary rounding.
  EXPECT_DOUBLE_EQ(
      fit_error({{"transit_trips_ratio", 0.90}, {"car_trips_ratio", 0.60}}, t), 0.10);
  calibration_targets one;
  one.values = {{"walk_trips_ratio", 0.68}};
  EXPECT_NEAR(fit_error({{"walk_trips_ratio", 0.77}}, one), 0.09, 1e-15);
  EXPECT_THROW(fit_error({{"car_trips_ratio", 0.6}}, t), error);
}

TEST(targets, validation) {
  calibration_targets t;
  EXPECT_THROW(check_targets(t), error);
  t.values = {{"transit_trips_ratio", 2.5}};
  EXPECT_THROW(check_targets(t), error);
  t.values = {{"transit_trips_ratio", 0.2}, {"subway_ridership_ratio", 0.3}};
  EXPECT_THROW(check_targets(t), error);
  t.values = {{"hovercraft_share", 0.2}};
  EXPECT_THROW(check_targets(t), error);
  t.values = {{"subway_ridership_ratio", 0.11}, {"car_trips_ratio", 0.42}};
  EXPECT_NO_THROW(check_targets(t));
  EXPECT_EQ(parse_observable("subway_ridership_ratio")->m, mode::transit);
  EXPECT_EQ(parse_observable("bike_share")->kind, observable_kind::share);
  EXPECT_THROW(targets_from_json("[1,2]"), parse_error);
  EXPECT_THROW(targets_from_json(R"({"car_share": "x"})"), parse_error);
  EXPECT_EQ(targets_from_json(R"({"car_share": 0.3})").values.at("car_share"), 0.3);
}

TEST(calibrate, fixed_point) {
  auto const sample = four_mode_sample(1);
  auto const sim = analytic(sample);
  auto const base = toy::precovid_params();
  auto const own = sim(base);
  calibration_targets t;
  for (auto const m : kFour) {
    t.values[std::string{to_string(m)} + "_share"] = own.shares[index_of(m)];
  }
  auto const res = calibrate_ascs(base, t, sim);
  EXPECT_EQ(res.iterations, 0);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.params, base);
  for (auto const& [name, r] : res.residuals) {
    EXPECT_EQ(r, 0.0) << name;
  }
}

TEST(calibrate, analytic_oracle_from_random_starts) {
  auto const sample = four_mode_sample(2);
  auto const sim = analytic(sample);
  calibration_options opt;
  opt.tol_pp = 0.1;
  rng_t rng{77};
  for (int start = 0; start < 100; ++start) {
    auto base = test::random_params(rng);
    auto const res = calibrate_ascs(base, equal_four(), sim, opt);
    ASSERT_TRUE(res.converged) << "start " << start;
    ASSERT_LE(res.iterations, 50);
    for (auto const& [name, r] : res.residuals) {
      ASSERT_LT(std::abs(r), 0.001) << name;
    }
    ASSERT_EQ(res.params.asc_of(mode::car), 0.0);
    ASSERT_LE(res.avg_abs_residual, res.history.front());
    for (std::size_t k = 1; k < res.history.size(); ++k) {
      ASSERT_LE(res.history[k], res.history[k - 1] + 1e-15) << "start " << start;
    }
  }
}

TEST(calibrate, ratio_targets_against_baseline) {
  auto const sample = four_mode_sample(3);
  auto const sim = analytic(sample);
  auto const base = toy::precovid_params();
  auto const baseline = sim(base).trips;
  calibration_targets t;
  t.values = {{"subway_ridership_ratio", 0.6}, {"car_trips_ratio", 1.2}};
  calibration_options opt;
  opt.baseline_trips = baseline;
  opt.tol_pp = 0.1;
  auto const res = calibrate_ascs(base, t, sim, opt);
  EXPECT_TRUE(res.converged);
  auto const got = observe(sim(res.params), t, baseline);
  EXPECT_NEAR(got.at("subway_ridership_ratio"), 0.6, 0.01);
  EXPECT_LT(res.params.asc_of(mode::transit), base.asc_of(mode::transit));

  calibration_options no_baseline;
  EXPECT_THROW(calibrate_ascs(base, t, sim, no_baseline), error);
}

TEST(calibrate, anchors_follow_targeted_modes) {
  auto const sample = four_mode_sample(4);
  auto const sim = analytic(sample);
  auto const base = toy::precovid_params();
  calibration_targets t;
  t.values = {{"bike_share", 0.05}};
  calibration_options opt;
  opt.max_iter = 1;
  auto const res = calibrate_ascs(base, t, sim, opt);
  EXPECT_DOUBLE_EQ(res.params.asc_of(mode::bikeshare) - base.asc_of(mode::bikeshare),
                   res.params.asc_of(mode::bike) - base.asc_of(mode::bike));
  EXPECT_EQ(res.params.asc_of(mode::ridehail), base.asc_of(mode::ridehail));
}

TEST(calibrate, best_seen_returned_on_non_convergence) {
  auto const sample = four_mode_sample(5);
  auto const sim = analytic(sample);
  calibration_options opt;
  opt.max_iter = 2;
  opt.step = 3.0;  // overshoots
  opt.tol_pp = 1e-6;
  auto const res = calibrate_ascs(toy::precovid_params(), equal_four(), sim, opt);
  EXPECT_FALSE(res.converged);
  EXPECT_EQ(res.history.size(), 3U);
  EXPECT_EQ(res.avg_abs_residual,
            *std::min_element(begin(res.history), end(res.history)));
}

TEST(calibrate, result_json) {
  calibration_result r;
  r.params = toy::covid_params();
  r.iterations = 3;
  r.converged = true;
  r.residuals = {{"transit_share", 0.001}};
  r.avg_abs_residual = 0.001;
  r.history = {0.1, 0.001};
  auto const text = calibration_result_to_json(r);
  EXPECT_EQ(mnl_params_from_json(text), r.params);
  EXPECT_NE(text.find("\"iterations\": 3"), std::string::npos);
}

TEST(calibrate, small_toy_transit_reduction) {
  sim_config sim = toy::sim(8);
  auto const assets = toy::assets(7, 120);
  auto const cfg = scenario_config::make("cal", phase::covid, 1.0, 7);
  auto const simulate = scenario_simulator(cfg, assets, sim);
  auto const pre = run_scenario(scenario_config::make("pre", phase::precovid, 1.0, 7),
                                assets, sim);
  calibration_targets t;
  t.values = {{"transit_share", pre.report.shares[index_of(mode::transit)] - 0.16}};
  auto const base = toy::precovid_params();
  auto const res = calibrate_ascs(base, t, simulate);
  EXPECT_TRUE(res.converged);
  EXPECT_LE(std::abs(res.residuals.at("transit_share")), 0.01);
  EXPECT_LT(res.params.asc_of(mode::transit), base.asc_of(mode::transit));
}
