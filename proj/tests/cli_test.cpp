#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"

#include "cli.hpp"

#include "fixtures.hpp"

using namespace covsim;
namespace fs = std::filesystem;

namespace {

struct result {
  int code{-1};
  std::string out;
  std::string err;
};

result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "covsim");
  std::vector<char const*> argv;
  for (auto const& a : args) {
    argv.push_back(a.c_str());
  }
  std::ostringstream out;
  std::ostringstream err;
  auto const code =
      cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string fx(std::string const& rel) { return test::fixture(rel).string(); }

}  // namespace

TEST(cli, help_and_usage) {
  EXPECT_EQ(invoke({"--help"}).code, cli::kOk);
  EXPECT_EQ(invoke({}).code, cli::kInputError);
  EXPECT_EQ(invoke({"frobnicate"}).code, cli::kInputError);
  EXPECT_EQ(invoke({"net", "--nodes", "x"}).code, cli::kInputError);
}

TEST(cli, net_exit_codes) {
  auto const ok = invoke({"net", "--nodes", fx("netio/corridor/nodes.csv"), "--links",
                          fx("netio/corridor/links.csv"), "--gtfs", fx("gtfs/basic")});
  EXPECT_EQ(ok.code, cli::kOk) << ok.out << ok.err;

  auto const dangling =
      invoke({"net", "--nodes", fx("netio/dangling/nodes.csv"), "--links",
              fx("netio/dangling/links.csv"), "--gtfs", fx("gtfs/basic")});
  EXPECT_EQ(dangling.code, cli::kInputError);
  EXPECT_NE(dangling.err.find(":3:"), std::string::npos) << dangling.err;

  auto const far = invoke({"net", "--nodes", fx("netio/corridor/nodes.csv"), "--links",
                           fx("netio/corridor/links.csv"), "--gtfs", fx("gtfs/far_stop"),
                           "--snap-radius", "500"});
  EXPECT_EQ(far.code, cli::kFindings) << far.out << far.err;

  auto const missing = invoke({"net", "--nodes", fx("netio/two_node/nodes.csv"),
                               "--links", fx("netio/two_node/links.csv"), "--gtfs",
                               fx("gtfs/missing")});
  EXPECT_EQ(missing.code, cli::kInputError);
}

TEST(cli, json_logs_are_json_lines) {
  auto const r = invoke({"--json-logs", "net", "--nodes", fx("netio/dangling/nodes.csv"),
                         "--links", fx("netio/dangling/links.csv"), "--gtfs",
                         fx("gtfs/basic")});
  EXPECT_EQ(r.code, cli::kInputError);
  ASSERT_FALSE(r.err.empty());
  EXPECT_EQ(r.err.front(), '{');
  EXPECT_NE(r.err.find("\"level\":\"error\""), std::string::npos) << r.err;
}

TEST(cli, sociability) {
  test::temp_dir dir;
  auto const report = (dir.path() / "report.json").string();
  auto const profile = (dir.path() / "profile.csv").string();
  auto const r = invoke({"sociability", "--frames", fx("sociability/frames.jsonl"),
                         "--out", report, "--profile", profile});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(test::read_text(report).find("\"safety_rate\""), std::string::npos);
  EXPECT_TRUE(fs::exists(profile));

  auto const empty = (dir.path() / "empty.jsonl").string();
  test::write_text(empty, "");
  EXPECT_EQ(invoke({"sociability", "--frames", empty, "--out", report}).code,
            cli::kInputError);
  EXPECT_EQ(invoke({"sociability", "--frames", fx("sociability/bad_class.jsonl"),
                    "--out", report})
                .code,
            cli::kInputError);
}

TEST(cli, toy_run_and_calibrate_errors) {
  test::temp_dir dir;
  auto const assets = (dir.path() / "assets").string();
  ASSERT_EQ(invoke({"toy", "--out", assets, "--agents-per-zone", "40", "--iterations",
                    "2"})
                .code,
            cli::kOk);
  ASSERT_TRUE(fs::exists(fs::path{assets} / "matrix.json"));

  auto const matrix = (dir.path() / "matrix.json").string();
  test::write_text(matrix, R"({"sim": {"iterations": 2}, "seed": 3, "scenarios": [
    {"name": "precovid", "phase": "precovid"},
    {"name": "covid", "phase": "covid"},
    {"name": "s2_p2", "phase": "p2", "capacity_factor": 0.5}]})");

  auto const run_into = [&](std::string const& out, std::string const& threads) {
    return invoke({"run", "--matrix", matrix, "--assets", assets, "--out", out,
                   "--threads", threads, "--events"});
  };
  auto const out1 = (dir.path() / "out1").string();
  auto const out2 = (dir.path() / "out2").string();
  auto const r1 = run_into(out1, "1");
  ASSERT_EQ(r1.code, cli::kOk) << r1.err;
  ASSERT_EQ(run_into(out2, "3").code, cli::kOk);
  for (auto const* name :
       {"modeshare.csv", "manifest.json", "report_covid.json", "stats_s2_p2.csv",
        "events_precovid.jsonl"}) {
    EXPECT_TRUE(fs::exists(fs::path{out1} / name)) << name;
  }
  EXPECT_EQ(test::read_text(fs::path{out1} / "modeshare.csv"),
            test::read_text(fs::path{out2} / "modeshare.csv"));
  EXPECT_EQ(test::read_text(fs::path{out1} / "events_covid.jsonl"),
            test::read_text(fs::path{out2} / "events_covid.jsonl"));

  auto const no_base = (dir.path() / "no_base.json").string();
  test::write_text(no_base, R"({"scenarios": [{"name": "covid", "phase": "covid"}]})");
  EXPECT_EQ(invoke({"run", "--matrix", no_base, "--assets", assets, "--out",
                    (dir.path() / "out3").string()})
                .code,
            cli::kInputError);

  auto const base = (fs::path{assets} / "params" / "covid_fit.json").string();
  auto const bad_targets = (dir.path() / "targets.json").string();
  test::write_text(bad_targets, R"({"teleport_share": 0.2})");
  EXPECT_EQ(invoke({"calibrate", "--base", base, "--targets", bad_targets, "--assets",
                    assets, "--out", (dir.path() / "cal.json").string()})
                .code,
            cli::kInputError);
  test::write_text(bad_targets, R"({"transit_share": )");
  EXPECT_EQ(invoke({"calibrate", "--base", base, "--targets", bad_targets, "--assets",
                    assets, "--out", (dir.path() / "cal.json").string()})
                .code,
            cli::kInputError);
}
