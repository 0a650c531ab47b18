#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fgp/config.hpp"
#include "fgp/fgp.hpp"

namespace fgp {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fgp_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  Outcome run(const std::string &args) {
    const fs::path out = dir_ / "stdout.txt", err = dir_ / "stderr.txt";
    const std::string cmd = std::string(FGP_CLI_PATH) + " " + args + " >" + out.string() + " 2>" +
                            err.string();
    const int status = std::system(cmd.c_str());
    Outcome r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string config(const std::string &name) const {
    return (fs::path(FGP_CONFIG_DIR) / name).string();
  }
  std::string path(const std::string &name) const { return (dir_ / name).string(); }

  void write(const std::string &name, const std::string &text) const {
    std::ofstream(dir_ / name, std::ios::binary) << text;
  }

  fs::path dir_;
};

TEST_F(Cli, SimulateScenarioOne) {
  const Outcome r = run("simulate --config " + config("scenario1.json") + " --out " + path("a.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const DataTable t = read_data_csv(path("a.csv"));
  EXPECT_EQ(t.size(), 450);
  EXPECT_EQ(t.observed_rows().size(), 405u);
  EXPECT_NE(slurp(path("a.csv")).find("mt19937_64"), std::string::npos);
}

TEST_F(Cli, SimulateIsByteIdentical) {
  ASSERT_EQ(run("simulate --config " + config("scenario1.json") + " --out " + path("a.csv")).code, 0);
  ASSERT_EQ(run("simulate --config " + config("scenario1.json") + " --out " + path("b.csv")).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ASSERT_EQ(run("simulate --config " + config("scenario1.json") + " --seed 5 --out " + path("c.csv")).code, 0);
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
}

TEST_F(Cli, SimulateRoundTripsLosslessly) {
  ASSERT_EQ(run("simulate --config " + config("scenario1.json") + " --out " + path("a.csv")).code, 0);
  const RunConfig cfg = load_config(config("scenario1.json"));
  const ScenarioData d = simulate_scenario(cfg.scenario, 0);
  const DataTable t = read_data_csv(path("a.csv"));
  EXPECT_EQ(t.z, d.z);
  EXPECT_EQ(t.y_true, d.y);
  EXPECT_EQ(t.locations, d.locations);
}

TEST_F(Cli, UnknownConfigKey) {
  write("bad.json", R"({"scenario": {"M": 100, "holdout_frac": 0.2}})");
  const Outcome r = run("simulate --config " + path("bad.json") + " --out " + path("a.csv"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("scenario.holdout_frac"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingDataFile) {
  const std::string missing = path("nope.csv");
  const Outcome r = run("fit --config " + config("small.json") + " --data " + missing + " --out " + path("f.json"));
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find(missing), std::string::npos) << r.err;
}

TEST_F(Cli, FitReportHasMonotoneTrace) {
  ASSERT_EQ(run("simulate --config " + config("small.json") + " --out " + path("d.csv")).code, 0);
  const Outcome r = run("fit --config " + config("small.json") + " --data " + path("d.csv") + " --out " +
                    path("f.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(path("f.json")));
  ASSERT_TRUE(j.contains("K"));
  EXPECT_GT(j.at("K").size(), 0u);
  const auto trace = j.at("trace").get<std::vector<double>>();
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t t = 1; t < trace.size(); ++t) {
    EXPECT_LE(trace[t], trace[t - 1] + 1e-8);
  }
  EXPECT_TRUE(j.contains("converged"));
  EXPECT_TRUE(j.contains("seconds"));
}

TEST_F(Cli, PureCarFitOmitsK) {
  ASSERT_EQ(run("simulate --config " + config("small_car.json") + " --out " + path("d.csv")).code, 0);
  const Outcome r = run("fit --config " + config("small_car.json") + " --data " + path("d.csv") + " --out " +
                    path("f.json"));
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(slurp(path("f.json")));
  EXPECT_FALSE(j.contains("K"));
  EXPECT_TRUE(j.contains("tau2"));
}

TEST_F(Cli, PredictWithAndWithoutStd) {
  ASSERT_EQ(run("simulate --config " + config("small.json") + " --out " + path("d.csv")).code, 0);
  ASSERT_EQ(run("fit --config " + config("small.json") + " --data " + path("d.csv") + " --out " +
                path("f.json")).code, 0);
  write("loc.csv", "id,coord1\n1,0\n2,7.5\n3,30\n");
  const std::string base = "predict --data " + path("d.csv") + " --fit " + path("f.json") +
                           " --locations " + path("loc.csv");
  Outcome r = run(base + " --std --out " + path("p.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string with = slurp(path("p.csv"));
  EXPECT_EQ(with.substr(0, with.find('\n')), "id,coord1,mean,std");
  r = run(base + " --out " + path("q.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string without = slurp(path("q.csv"));
  EXPECT_EQ(without.substr(0, without.find('\n')), "id,coord1,mean");
  // Means agree digit for digit.
  std::istringstream a(with), b(without);
  std::string la, lb;
  std::getline(a, la);
  std::getline(b, lb);
  while (std::getline(a, la) && std::getline(b, lb)) {
    EXPECT_EQ(la.substr(0, la.rfind(',')), lb);
  }
}

TEST_F(Cli, PredictOutsideDomain) {
  ASSERT_EQ(run("simulate --config " + config("small.json") + " --out " + path("d.csv")).code, 0);
  ASSERT_EQ(run("fit --config " + config("small.json") + " --data " + path("d.csv") + " --out " +
                path("f.json")).code, 0);
  write("loc.csv", "id,coord1\n1,3\n2,45\n");
  const Outcome r = run("predict --data " + path("d.csv") + " --fit " + path("f.json") + " --locations " +
                    path("loc.csv") + " --out " + path("p.csv"));
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;
}

TEST_F(Cli, QuickBenchmarkIndependentOfWorkers) {
  const std::string base = "benchmark --quick --config " + config("small.json");
  const Outcome a = run(base + " --workers 1 --out " + path("a.csv"));
  ASSERT_EQ(a.code, 0) << a.err;
  const Outcome b = run(base + " --workers 3 --out " + path("b.csv"));
  ASSERT_EQ(b.code, 0) << b.err;
  const std::string text = slurp(path("a.csv"));
  EXPECT_EQ(text, slurp(path("b.csv")));
  EXPECT_EQ(text.substr(0, text.find('\n')), "method,ave_mspe,std_mspe,rel_efficiency");
  EXPECT_NE(text.find("\nEK,"), std::string::npos);
  const std::string ek = text.substr(text.find("\nEK,") + 1);
  EXPECT_EQ(ek.substr(ek.rfind(',', ek.find('\n')) + 1, 1), "1");
}

TEST_F(Cli, QuickTiming) {
  const Outcome r = run("timing --quick --workers 2 --out " + path("t.csv"));
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(path("t.csv")));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "M,J,seconds");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST_F(Cli, MissingSubcommandIsConfigError) { EXPECT_EQ(run("").code, 2); }

} // namespace
} // namespace fgp
