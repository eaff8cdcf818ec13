#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "segloc/io.hpp"

using namespace segloc;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("segloc-cli-" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static int run(const std::string& args) {
    const std::string cmd = std::string(SEGLOC_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

Scenario empty_scenario() {
  Scenario s;
  s.map = EnvironmentMap2D(SquareBounds{200}, {});
  s.source = {15, -20, 0};
  s.truth.sigma_los = s.truth.sigma_nlos = 0.0;
  return s;
}

}  // namespace

TEST_F(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("simulate --count 5"), 2);
  EXPECT_EQ(run("baseline --method nope --measurements x --out y"), 2);
}

TEST_F(Cli, HelpExitsCleanly) { EXPECT_EQ(run("--help"), 0); }

TEST_F(Cli, RuntimeErrorsExitWithOne) {
  io::write_file(path("bad.csv"), "x,y,z,rss_db,los\n1,2,20\n");
  io::write_json(path("s.json"), io::scenario_to_json(empty_scenario()));
  EXPECT_NE(run("localize --scenario " + path("s.json") + " --measurements " + path("bad.csv") +
                " --out " + path("r.json")),
            0);
  io::write_file(path("ok.csv"), "x,y,z,rss_db,los\n1,2,20,-40,1\n");
  EXPECT_EQ(run("localize --scenario " + path("s.json") + " --measurements " + path("ok.csv") +
                " --out /nonexistent-dir/r.json"),
            1);
}

TEST_F(Cli, SimulateThenLocalizeRecoversNoiselessSource) {
  const Scenario s = empty_scenario();
  io::write_json(path("s.json"), io::scenario_to_json(s));
  ASSERT_EQ(run("simulate --scenario " + path("s.json") + " --count 60 --seed 4 --out " + path("m.csv")), 0);
  EXPECT_EQ(io::read_measurements(path("m.csv")), generate_measurements(s, 60, 4));
  ASSERT_EQ(run("localize --scenario " + path("s.json") + " --measurements " + path("m.csv") +
                " --grid-spacing 5 --out " + path("r.json")),
            0);
  const auto r = io::read_json(path("r.json"));
  EXPECT_EQ(io::vec_from_json(r.at("s_hat")), s.source);
  EXPECT_LE(r.at("total_residual").get<double>(), 1e-12);
}

TEST_F(Cli, LocalizeIsBlindToHeightsAndLabels) {
  const MeasurementSet ms = generate_measurements(reference_scenario(), 80, 6);
  MeasurementSet unlabeled = ms;
  for (auto& m : unlabeled) m.truth_los.reset();
  io::write_measurements(path("labeled.csv"), ms);
  io::write_measurements(path("unlabeled.csv"), unlabeled);
  io::write_json(path("low.json"), io::scenario_to_json(reference_scenario(5.0)));
  io::json no_heights = io::scenario_to_json(reference_scenario());
  for (auto& b : no_heights.at("buildings")) b.erase("height");
  io::write_json(path("none.json"), no_heights);

  const std::string common = " --grid-spacing 20 --refine 5 --threads 2";
  ASSERT_EQ(run("localize --scenario " + path("low.json") + " --measurements " + path("labeled.csv") +
                common + " --out " + path("a.json")),
            0);
  ASSERT_EQ(run("localize --scenario " + path("none.json") + " --measurements " + path("unlabeled.csv") +
                common + " --out " + path("b.json")),
            0);
  EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));
}

TEST_F(Cli, BaselineWritesEstimate) {
  const MeasurementSet ms = generate_measurements(reference_scenario(), 50, 2);
  io::write_measurements(path("m.csv"), ms);
  for (const std::string method : {"wcl", "wcl-mod", "wcl-genius"}) {
    ASSERT_EQ(run("baseline --method " + method + " --measurements " + path("m.csv") + " --out " + path("b.json")),
              0);
    const auto j = io::read_json(path("b.json"));
    const Method m = parse_method(method);
    const WclConfig cfg = m == Method::wcl       ? WclConfig::plain()
                          : m == Method::wcl_mod ? WclConfig::modified()
                                                 : WclConfig::genius();
    EXPECT_EQ(io::vec_from_json(j.at("s_hat")), wcl(ms, cfg));
    EXPECT_EQ(j.at("method").get<std::string>(), method_name(m));
  }
}

TEST_F(Cli, BenchRowCountAndDumpTensor) {
  io::json j{{"scenario", io::scenario_to_json(reference_scenario())},
             {"sweep", {{"parameter", "M"}, {"values", {40, 50}}}},
             {"trials", 3},
             {"methods", {"segreg", "wcl", "wcl_mod", "wcl_genius"}},
             {"grid", {{"spacing", 25}, {"nb", 11}}}};
  io::write_json(path("plan.json"), j);
  ASSERT_EQ(run("bench --plan " + path("plan.json") + " --no-timing --out " + path("b.csv") + " --summary " +
                path("s.csv")),
            0);
  const auto records = io::bench_records_from_csv(io::read_file(path("b.csv")));
  EXPECT_EQ(records.size(), 4u * 2u * 3u);
  const std::string first = io::read_file(path("b.csv"));
  ASSERT_EQ(run("bench --plan " + path("plan.json") + " --no-timing --threads 1 --out " + path("b2.csv")), 0);
  EXPECT_EQ(first, io::read_file(path("b2.csv")));

  const MeasurementSet ms = generate_measurements(reference_scenario(), 30, 1);
  io::write_measurements(path("m.csv"), ms);
  io::write_json(path("s.json"), io::scenario_to_json(reference_scenario()));
  ASSERT_EQ(run("localize --scenario " + path("s.json") + " --measurements " + path("m.csv") +
                " --grid-spacing 50 --nb 5 --dump-tensor " + path("t.json") + " --out " + path("r.json")),
            0);
  const auto t = io::read_json(path("t.json"));
  EXPECT_EQ(t.at("angles").size(), 5u);
  EXPECT_EQ(t.at("entries").size(), io::read_json(path("r.json")).at("candidate_count").get<std::size_t>());
}
