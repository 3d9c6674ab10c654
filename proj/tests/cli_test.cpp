#include <gridsim/cli.hpp>

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace gridsim {
namespace {

struct Invocation {
  int exit_code;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gridsim_cli_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

Invocation invoke(const std::string& args) {
  const auto dir = scratch("io");
  const auto out = dir / "stdout", err = dir / "stderr";
  const std::string cmd = std::string(GRIDSIM_CLI_PATH) + " " + args + " >" + out.string() +
                          " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, cli::read_file(out), cli::read_file(err)};
}

std::size_t lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

std::string scenario(const std::string& name) {
  return std::string(GRIDSIM_SCENARIO_DIR) + "/" + name;
}

TEST(CliSigma, MedianRate) {
  const auto r = invoke("sigma --rate 0.5 --convention math");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(std::stod(r.out), 0.0);
  EXPECT_TRUE(r.err.empty());
}

TEST(CliSigma, IndustrialSixSigma) {
  const auto r = invoke("sigma --sigma 6 --convention industrial");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NEAR(std::stod(r.out), 3.40e-6, 0.01e-6);
  std::ostringstream direct;
  EXPECT_NEAR(cli::cmd_sigma(2.87e-7, std::nullopt, SigmaConvention::Mathematical, direct), 5.0,
              1e-3);
}

TEST(CliErrors, OneDiagnosticLineAndNonzeroExit) {
  for (const std::string args :
       {"sigma --rate 2", "sigma --rate 0.1 --sigma 3", "sigma", "sigma --rate 0.1 --convention x",
        "run --scenario /nonexistent.cfg --out /tmp/x", "fit --samples /nonexistent.csv",
        "bogus", "", "run --scenario"}) {
    const auto r = invoke(args);
    EXPECT_NE(r.exit_code, 0) << args;
    EXPECT_EQ(lines(r.err), 1u) << args << ": " << r.err;
    EXPECT_EQ(r.err.rfind("gridsim: error: ", 0), 0u) << args;
  }
}

TEST(CliErrors, BadScenarioNamesKey) {
  const auto dir = scratch("bad");
  {
    std::ofstream f(dir / "bad.cfg");
    f << "[dataset]\ntotal_events = 10\nevents_per_job = 1\n[[site]]\nsite_id = \"a\"\nslots = "
         "1\n[failure]\np_compute = 1.5\n";
  }
  const auto r = invoke("run --scenario " + (dir / "bad.cfg").string() + " --out " +
                        (dir / "out").string());
  EXPECT_NE(r.exit_code, 0);
  EXPECT_EQ(lines(r.err), 1u);
  EXPECT_NE(r.err.find("failure.p_compute"), std::string::npos) << r.err;
}

TEST(CliRun, WritesReportsDeterministically) {
  const auto a = scratch("run_a"), b = scratch("run_b");
  for (const auto& dir : {a, b}) {
    const auto r = invoke("run --scenario " + scenario("smoke.cfg") + " --out " + dir.string() +
                          " --attempts-log");
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  for (const char* name : {"summary.json", "recovery_costs.csv", "attempts.csv"}) {
    const auto x = cli::read_file(a / name), y = cli::read_file(b / name);
    EXPECT_FALSE(x.empty()) << name;
    EXPECT_EQ(x, y) << name;
    EXPECT_EQ(x.find('\r'), std::string::npos) << name;
  }
  const auto recovery = cli::read_file(a / "recovery_costs.csv");
  EXPECT_EQ(recovery.substr(0, recovery.find('\n')), "task_id,recovery_cpu_hours");
  EXPECT_EQ(lines(recovery), 41u);
  const auto attempts = cli::read_file(a / "attempts.csv");
  EXPECT_EQ(attempts.substr(0, attempts.find('\n')),
            "job_id,attempt,site_id,outcome,stage,cpu_seconds,wall_start,wall_end,events_corrupted");

  const auto summary = nlohmann::json::parse(cli::read_file(a / "summary.json"));
  EXPECT_EQ(summary["tool"], "gridsim");
  EXPECT_EQ(summary["seed"], 42);
  EXPECT_EQ(summary["scenario"]["dataset"]["total_events"], 200000);
  const auto& d = summary["defects"];
  EXPECT_EQ(d["events_lost"].get<std::uint64_t>() + d["events_recovery_queue"].get<std::uint64_t>() +
                d["events_succeeded"].get<std::uint64_t>(),
            d["events_total"].get<std::uint64_t>());
  EXPECT_GE(summary["makespan_seconds"].get<double>(), summary["ideal_makespan_seconds"].get<double>());
}

TEST(CliRun, SeedChangesAttemptLog) {
  const auto dir = scratch("seed");
  auto text = cli::read_file(scenario("smoke.cfg"));
  text.replace(text.find("seed = 42"), 9, "seed = 43");
  {
    std::ofstream f(dir / "seed43.cfg", std::ios::binary);
    f << text;
  }
  std::ostringstream sink;
  cli::cmd_run(scenario("smoke.cfg"), dir / "a", true, sink);
  cli::cmd_run(dir / "seed43.cfg", dir / "b", true, sink);
  EXPECT_NE(cli::read_file(dir / "a" / "attempts.csv"), cli::read_file(dir / "b" / "attempts.csv"));
}

TEST(CliFit, RecoversSyntheticWeibull) {
  const auto dir = scratch("fit");
  const weibull::WeibullParams truth{1.8, 5.0};
  RngStream rng(123, 0);
  {
    std::ofstream f(dir / "samples.csv", std::ios::binary);
    f << "recovery_cpu_hours\n";
    for (int i = 0; i < 10'000; ++i) f << detail::format_double(weibull::sample(truth, rng)) << '\n';
    f << "0\n";
  }
  std::ostringstream out;
  const auto fit = cli::cmd_fit(dir / "samples.csv", 1, out);
  ASSERT_EQ(fit.model.components.size(), 1u);
  EXPECT_NEAR(fit.model.components[0].params.shape, 1.8, 0.05 * 1.8);
  EXPECT_NEAR(fit.model.components[0].params.scale, 5.0, 0.05 * 5.0);
  EXPECT_NE(out.str().find("ks_statistic"), std::string::npos);
  EXPECT_NE(out.str().find("zero-valued excluded: 1"), std::string::npos);
  EXPECT_NE(out.str().find("modes=3"), std::string::npos);

  const auto r = invoke("fit --samples " + (dir / "samples.csv").string() + " --modes 1");
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("component 1:"), std::string::npos);
}

TEST(CliFit, AcceptsRecoveryCostsFromRun) {
  const auto dir = scratch("fit_run");
  std::ostringstream sink;
  cli::cmd_run(scenario("smoke.cfg"), dir, false, sink);
  const auto r = invoke("fit --samples " + (dir / "recovery_costs.csv").string() + " --modes 2");
  EXPECT_EQ(r.exit_code, 0) << r.err;
  EXPECT_NE(r.out.find("component 2:"), std::string::npos) << r.out;
}

TEST(CliFit, RejectsGarbageRows) {
  const auto dir = scratch("garbage");
  {
    std::ofstream f(dir / "bad.csv");
    f << "x\n1.0\nabc\n";
  }
  std::ostringstream out;
  EXPECT_THROW(cli::cmd_fit(dir / "bad.csv", 1, out), ConfigError);
}

}  // namespace
}  // namespace gridsim
