#include <gridsim/cli.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

int fail(const std::string& message, int code = 1) {
  std::cerr << "gridsim: error: " << one_line(message) << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid campaign failure/retry simulator and reliability toolkit", "gridsim"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gridsim::kToolVersion);

  auto* run = app.add_subcommand("run", "Simulate a scenario and write reports");
  std::string scenario_path, out_dir;
  bool attempts_log = false;
  run->add_option("--scenario", scenario_path, "Scenario file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_flag("--attempts-log", attempts_log, "Also write attempts.csv");

  auto* fit = app.add_subcommand("fit", "Fit a Weibull mixture to recovery-cost samples");
  std::string samples_path;
  int modes = 1;
  fit->add_option("--samples", samples_path, "CSV of samples (last column)")->required();
  fit->add_option("--modes", modes, "Number of mixture components")->check(CLI::PositiveNumber);

  auto* sigma = app.add_subcommand("sigma", "Convert between tail rate and sigma level");
  std::optional<double> rate_in, sigma_in;
  std::string convention = "math";
  auto* rate_opt = sigma->add_option("--rate", rate_in, "Tail probability -> sigma");
  auto* sigma_opt = sigma->add_option("--sigma", sigma_in, "Sigma level -> tail probability");
  rate_opt->excludes(sigma_opt);
  sigma->add_option("--convention", convention, "math | industrial")
      ->check(CLI::IsMember({"math", "mathematical", "industrial"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << gridsim::kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail(e.what(), 2);
  }

  try {
    if (run->parsed()) {
      gridsim::cli::cmd_run(scenario_path, out_dir, attempts_log, std::cout);
    } else if (fit->parsed()) {
      gridsim::cli::cmd_fit(samples_path, modes, std::cout);
    } else if (sigma->parsed()) {
      gridsim::cli::cmd_sigma(rate_in, sigma_in, *gridsim::cli::parse_convention(convention),
                              std::cout);
    }
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  return 0;
}
