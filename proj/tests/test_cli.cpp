#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>
#include <sys/wait.h>

#include <json.hpp>

#include "peakbound/problem_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace peakbound;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  static fs::path dir;

  static void SetUpTestSuite() {
    dir = fs::temp_directory_path() / ("peakbound_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  static void TearDownTestSuite() { fs::remove_all(dir); }

  static Outcome run(const std::string& args) {
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(PEAKBOUND_CLI) + " " + args + " 2>" + err.string();
    Outcome r;
    FILE* p = ::popen(cmd.c_str(), "r");
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
    const int status = ::pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
  }

  static json read_json(const fs::path& p) { return json::parse(slurp(p)); }

  static std::string problem(const std::string& name) {
    return (fs::path(PEAKBOUND_PROBLEMS) / (name + ".json")).string();
  }

  static fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
  }

  static fs::path write(const std::string& name, const json& j) { return write(name, j.dump(2)); }
};

fs::path Cli::dir;

}  // namespace

TEST_F(Cli, MalformedJsonExitsTwoWithoutReport) {
  const auto bad = write("bad.json", std::string("{\"schema\": \"peakbound/1\", \"mode\": "));
  const fs::path out = dir / "bad_report.json";
  const auto r = run("bound " + bad.string() + " -o " + out.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_FALSE(r.err.empty());
}

TEST_F(Cli, MissingFileAndBadFlagsExitTwo) {
  EXPECT_EQ(run("bound " + (dir / "nope.json").string()).code, 2);
  EXPECT_EQ(run("bound " + problem("stationary") + " --backend nonsense").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

TEST_F(Cli, WrongSchemaVersionIsAParseError) {
  json j = read_json(problem("stationary"));
  j["schema"] = "peakbound/99";
  EXPECT_EQ(run("bound " + write("schema.json", j).string()).code, 2);
}

TEST_F(Cli, ValidationErrorExitsThree) {
  json j = read_json(problem("flow_theta0"));
  j["objectives"] = json::array({json::array({{{"c", 1.0}, {"e", {{"w", {1}}}}}})});
  const fs::path out = dir / "invalid_report.json";
  const auto r = run("bound " + write("invalid.json", j).string() + " -o " + out.string());
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("objective_block"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
}

TEST_F(Cli, SafetyOnMaxProblemExitsThree) {
  EXPECT_EQ(run("safety " + problem("stationary")).code, 3);
}

TEST_F(Cli, InfeasibleRelaxationExitsFour) {
  // X0 lies outside X, so no measure satisfies the relaxation.
  json j = read_json(problem("stationary"));
  j["sets"]["X0"] = json::array({json::array({{{"c", -1.0}}})});
  j["options"]["samples"] = 0;
  const auto r = run("bound " + write("infeasible.json", j).string() + " -o " + (dir / "inf.json").string());
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("solver"), std::string::npos);
}

TEST_F(Cli, SchemaRoundTripOnShippedProblems) {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(PEAKBOUND_PROBLEMS)) {
    if (entry.path().extension() != ".json") continue;
    const json original = read_json(entry.path());
    const ProblemFile a = problem_from_json(original);
    const json once = problem_to_json(a);
    const ProblemFile b = problem_from_json(once);
    EXPECT_EQ(problem_to_json(b), once) << entry.path();
    EXPECT_EQ(a.sys.subsystems.size(), b.sys.subsystems.size());
    for (std::size_t k = 0; k < a.sys.subsystems.size(); ++k)
      for (std::size_t i = 0; i < a.sys.subsystems[k].f.size(); ++i)
        EXPECT_EQ(a.sys.subsystems[k].f[i], b.sys.subsystems[k].f[i]) << entry.path();
    ++count;
  }
  EXPECT_GE(count, 10);
}

TEST_F(Cli, BoundReportOnStdoutIsCleanJson) {
  const auto r = run("bound " + problem("stationary") + " --samples 20");
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_EQ(rep["schema"], kSchema);
  EXPECT_NEAR(rep["bound"].get<double>(), 0.5, 1e-4);
  EXPECT_TRUE(rep.contains("certificate"));
  EXPECT_TRUE(rep.contains("solve_stats"));
  EXPECT_GE(rep["sampling"]["gap"].get<double>(), -1e-6);
  EXPECT_NE(r.err.find("stationary"), std::string::npos);
}

TEST_F(Cli, SampleIsDeterministicAndSound) {
  const std::string a = (dir / "s1").string(), b = (dir / "s2").string(), c = (dir / "s3").string();
  ASSERT_EQ(run("sample " + problem("flow_theta0") + " --samples 2000 --seed 1 -o " + a).code, 0);
  ASSERT_EQ(run("sample " + problem("flow_theta0") + " --samples 2000 --seed 1 -o " + b).code, 0);
  ASSERT_EQ(run("sample " + problem("flow_theta0") + " --samples 50 --seed 2 -o " + c).code, 0);
  const std::string csv = slurp(a + ".csv");
  EXPECT_FALSE(csv.empty());
  EXPECT_EQ(csv, slurp(b + ".csv"));
  EXPECT_NE(csv, slurp(c + ".csv"));
  const json s = read_json(a + ".summary.json");
  EXPECT_EQ(s["num"].get<int>(), 2000);
  // d = 2 is the loosest order; every bound of the hierarchy is above it
  const auto r = run("bound " + problem("flow_theta0") + " -d 2 --samples 0");
  ASSERT_EQ(r.code, 0);
  EXPECT_LE(s["empirical_max"].get<double>(), json::parse(r.out).at("bound").template get<double>() + 1e-6);
}

TEST_F(Cli, StationarySampleGivesInitialValue) {
  const auto r = run("sample " + problem("stationary") + " --samples 7");
  ASSERT_EQ(r.code, 0);
  std::istringstream is(r.out);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line.rfind("traj,t,x1", 0), 0u);
  const std::string prefix = (dir / "stat").string();
  ASSERT_EQ(run("sample " + problem("stationary") + " --samples 7 -o " + prefix).code, 0);
  EXPECT_DOUBLE_EQ(read_json(prefix + ".summary.json")["empirical_max"].get<double>(), 0.5);
}

TEST_F(Cli, SafetyVerdicts) {
  const fs::path unsafe = dir / "unsafe.json";
  auto r = run("safety " + problem("unsafe_stationary") + " -o " + unsafe.string());
  ASSERT_EQ(r.code, 0) << r.err;
  json rep = read_json(unsafe);
  EXPECT_GE(rep["bound"].get<double>(), -1e-6);
  EXPECT_EQ(rep["safety"], "not certified");

  const fs::path safe = dir / "safe.json";
  r = run("safety " + problem("halfcircle") + " -d 5 --samples 200 -o " + safe.string());
  ASSERT_EQ(r.code, 0) << r.err;
  rep = read_json(safe);
  EXPECT_NEAR(rep["bound"].get<double>(), -0.1417, 0.01);
  EXPECT_EQ(rep["safety"], "certified safe");
}

TEST_F(Cli, MaximinWithOneObjectiveMatchesBound) {
  json j = read_json(problem("flow_theta0"));
  j["objective_mode"] = "maximin";
  const auto mm = run("safety " + write("flow_mm.json", j).string() + " -d 2 --samples 0");
  const auto mx = run("bound " + problem("flow_theta0") + " -d 2 --samples 0");
  ASSERT_EQ(mm.code, 0);
  ASSERT_EQ(mx.code, 0);
  EXPECT_NEAR(json::parse(mm.out)["bound"].get<double>(), json::parse(mx.out)["bound"].get<double>(), 1e-6);
}

TEST_F(Cli, AttitudeSqrtReportInDegrees) {
  const auto r = run("bound " + problem("attitude") + " -d 5 --sqrt --samples 0");
  ASSERT_EQ(r.code, 0) << r.err;
  const json rep = json::parse(r.out);
  EXPECT_NEAR(rep["sqrt_bound"].get<double>(), 20.69, 0.05 * 20.69);
  EXPECT_EQ(rep["sqrt_unit"], "deg");
}

TEST_F(Cli, PlotdataBundles) {
  EXPECT_EQ(run("plotdata").code, 2);

  const fs::path rep = dir / "flow_report.json";
  ASSERT_EQ(run("bound " + problem("flow_theta0") + " -d 3 --samples 0 -o " + rep.string()).code, 0);
  const fs::path out = dir / "plots";
  auto r = run("plotdata " + rep.string() + " -o " + out.string() + " --grid 21 --samples 40");
  ASSERT_EQ(r.code, 0) << r.err;
  const json bundle = read_json(out / "flow_report_bundle.json");
  EXPECT_TRUE(bundle["contained"].get<bool>()) << bundle.dump();
  EXPECT_TRUE(fs::exists(out / "flow_report_levelset.csv"));
  EXPECT_TRUE(fs::exists(out / "flow_report_trajectories.csv"));

  json bare = read_json(rep);
  bare.erase("certificate");
  const auto bare_path = write("bare_report.json", bare);
  r = run("plotdata " + bare_path.string() + " -o " + out.string() + " --samples 5");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
  EXPECT_FALSE(fs::exists(out / "bare_report_levelset.csv"));
  EXPECT_TRUE(fs::exists(out / "bare_report_trajectories.csv"));
}

TEST_F(Cli, ExportFormats) {
  const fs::path j = dir / "prog.json", s = dir / "prog.sdpa";
  ASSERT_EQ(run("export " + problem("flow_theta0") + " -d 2 -o " + j.string()).code, 0);
  ASSERT_EQ(run("export " + problem("flow_theta0") + " -d 2 --format sdpa -o " + s.string()).code, 0);
  EXPECT_EQ(read_json(j)["kind"], "conic_program");
  EXPECT_EQ(slurp(s).rfind("\"peakbound", 0), 0u);
}
