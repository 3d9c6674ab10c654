#pragma once

// Command implementations behind the gridsim executable. Each command writes
// its normal output to `out` and reports failures by throwing.

#include <gridsim/engine.hpp>
#include <gridsim/errors.hpp>
#include <gridsim/reliability.hpp>
#include <gridsim/report.hpp>
#include <gridsim/scenario_file.hpp>
#include <gridsim/weibull.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace gridsim::cli {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  try {
    return parse_scenario(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.filename().string() + ": " + e.what());
  }
}

struct RunFiles {
  std::filesystem::path summary;
  std::filesystem::path recovery_costs;
  std::optional<std::filesystem::path> attempts;
};

/// Simulates the scenario and writes summary.json, recovery_costs.csv and,
/// optionally, attempts.csv (streamed, not buffered) into `out_dir`.
inline RunFiles cmd_run(const std::filesystem::path& scenario_path,
                        const std::filesystem::path& out_dir, bool attempts_log,
                        std::ostream& out) {
  const Scenario scenario = load_scenario(scenario_path);
  std::filesystem::create_directories(out_dir);

  RunFiles files{out_dir / "summary.json", out_dir / "recovery_costs.csv", std::nullopt};

  RunOptions options;
  options.keep_attempt_log = false;
  std::ofstream attempts;
  if (attempts_log) {
    files.attempts = out_dir / "attempts.csv";
    attempts = open_output(*files.attempts);
    attempts << kAttemptsCsvHeader << '\n';
    options.attempt_sink = [&](const AttemptRecord& rec) {
      write_attempt_row(attempts, scenario, rec);
    };
  }

  const SimResult result = run(scenario, options);
  const double ideal = ideal_makespan(scenario);
  const auto summary = run_summary(scenario, result, ideal);

  {
    auto f = open_output(files.summary);
    f << summary.dump(2) << '\n';
  }
  {
    auto f = open_output(files.recovery_costs);
    write_recovery_csv(f, recovery_cost_samples(result));
  }
  if (attempts.is_open()) attempts.close();

  char line[256];
  std::snprintf(line, sizeof line,
                "cpu_overhead=%.6f time_overhead=%.6f defect_rate=%.6e makespan=%.1fs\n",
                summary["overhead"]["cpu_overhead"].get<double>(),
                summary["overhead"]["time_overhead"].get<double>(),
                summary["defects"]["defect_rate"].get<double>(), result.makespan);
  out << line;
  return files;
}

struct SampleFile {
  std::vector<double> values;  // positive samples
  std::size_t zeros = 0;       // excluded zero-valued rows
};

/// Reads a numeric CSV column: the last field of every row. A non-numeric
/// first row is treated as a header.
inline SampleFile read_samples(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  SampleFile s;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto field = detail::trim(std::string_view(line).substr(
        line.rfind(',') == std::string::npos ? 0 : line.rfind(',') + 1));
    if (field.empty()) continue;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
      if (line_no == 1) continue;
      throw ConfigError(path.filename().string() + ": line " + std::to_string(line_no) +
                        ": not a number: " + std::string(field));
    }
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DomainError(path.filename().string() + ": line " + std::to_string(line_no) +
                        ": samples must be finite and >= 0");
    if (v == 0.0)
      ++s.zeros;
    else
      s.values.push_back(v);
  }
  return s;
}

/// Fits an n-mode Weibull mixture and prints the components, goodness of fit
/// and a log-likelihood comparison over 1..3 modes.
inline weibull::MixtureFit cmd_fit(const std::filesystem::path& samples_path, int n_modes,
                                   std::ostream& out) {
  const SampleFile data = read_samples(samples_path);
  const auto fit = weibull::fit_mixture(data.values, n_modes);
  const double ks = weibull::ks_statistic(data.values, fit.model);

  char line[256];
  std::snprintf(line, sizeof line, "samples: %zu (zero-valued excluded: %zu)\n",
                data.values.size(), data.zeros);
  out << line;
  out << "modes: " << n_modes << '\n';
  for (std::size_t j = 0; j < fit.model.components.size(); ++j) {
    const auto& c = fit.model.components[j];
    std::snprintf(line, sizeof line, "component %zu: weight=%.6f shape=%.6f scale=%.6g\n", j + 1,
                  c.weight, c.params.shape, c.params.scale);
    out << line;
  }
  std::snprintf(line, sizeof line, "log_likelihood: %.6f\nks_statistic: %.6f\n",
                fit.log_likelihood, ks);
  out << line;
  out << "converged: " << (fit.converged ? "true" : "false") << " (iterations "
      << fit.iterations << ")\n";

  out << "compare:\n";
  for (int m = 1; m <= 3; ++m) {
    if (data.values.size() < 10 * static_cast<std::size_t>(m)) break;
    const auto alt = m == n_modes ? fit : weibull::fit_mixture(data.values, m);
    std::snprintf(line, sizeof line, "  modes=%d log_likelihood=%.6f ks_statistic=%.6f\n", m,
                  alt.log_likelihood, weibull::ks_statistic(data.values, alt.model));
    out << line;
  }
  return fit;
}

inline std::optional<SigmaConvention> parse_convention(std::string_view s) {
  if (s == "math" || s == "mathematical") return SigmaConvention::Mathematical;
  if (s == "industrial") return SigmaConvention::Industrial;
  return std::nullopt;
}

/// Converts a tail rate to a sigma level or back; prints the single number.
inline double cmd_sigma(std::optional<double> rate, std::optional<double> sigma,
                        SigmaConvention convention, std::ostream& out) {
  if (rate.has_value() == sigma.has_value())
    throw ConfigError("sigma: give exactly one of --rate or --sigma");
  char line[64];
  double value = 0.0;
  if (rate) {
    value = sigma_from_rate(*rate, convention);
    std::snprintf(line, sizeof line, "%.6f\n", value);
  } else {
    value = rate_from_sigma(*sigma, convention);
    std::snprintf(line, sizeof line, "%.6e\n", value);
  }
  out << line;
  return value;
}

}  // namespace gridsim::cli
