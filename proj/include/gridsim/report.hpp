#pragma once

#include <gridsim/engine.hpp>
#include <gridsim/reliability.hpp>
#include <gridsim/scenario_file.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <ostream>
#include <string>

namespace gridsim {

inline constexpr const char* kToolName = "gridsim";
inline constexpr const char* kToolVersion = "1.0.0";

inline constexpr const char* kRecoveryCsvHeader = "task_id,recovery_cpu_hours";
inline constexpr const char* kAttemptsCsvHeader =
    "job_id,attempt,site_id,outcome,stage,cpu_seconds,wall_start,wall_end,events_corrupted";

/// Exact decimal rendering of a core-microsecond amount in core-seconds.
inline std::string format_cpu_seconds(CpuMicros cpu) {
  char buf[48];
  const char* sign = cpu < 0 ? "-" : "";
  const auto mag = static_cast<unsigned long long>(cpu < 0 ? -cpu : cpu);
  std::snprintf(buf, sizeof buf, "%s%llu.%06llu", sign, mag / 1000000ULL, mag % 1000000ULL);
  return buf;
}

inline nlohmann::ordered_json scenario_json(const Scenario& s) {
  nlohmann::ordered_json j;
  j["dataset"] = {{"total_events", s.dataset.total_events},
                  {"events_per_job", s.dataset.events_per_job},
                  {"nominal_cpu_per_event", s.dataset.nominal_cpu_per_event}};
  auto sites = nlohmann::ordered_json::array();
  for (const auto& site : s.sites)
    sites.push_back({{"site_id", site.site_id},
                     {"slots", site.slots},
                     {"speed_factor", site.speed_factor},
                     {"failure_multiplier", site.failure_multiplier}});
  j["sites"] = std::move(sites);
  const auto& f = s.failure_model;
  j["failure"] = {{"p_setup", f.p_setup},
                  {"p_compute", f.p_compute},
                  {"p_stageout", f.p_stageout},
                  {"permanent_fraction", f.permanent_fraction},
                  {"corruption_per_event", f.corruption_per_event},
                  {"c_setup", f.c_setup}};
  const auto& r = s.retry_policy;
  j["retry"] = {{"max_retries", r.max_retries},
                {"requeue_delay", r.requeue_delay},
                {"dedicated_recovery", r.dedicated_recovery}};
  j["run"] = {{"granularity", std::string(to_string(s.granularity))},
              {"seed", s.seed},
              {"n_tasks", s.n_tasks}};
  return j;
}

/// Machine-readable run summary. Keys are emitted in a fixed order so that
/// the serialized form is byte-stable for a given result.
inline nlohmann::ordered_json run_summary(const Scenario& scenario, const SimResult& result,
                                          double ideal) {
  const DefectReport defects = defect_report(result);
  const OverheadReport overhead = overhead_report(result, ideal);
  const auto costs = recovery_cost_samples(result);
  std::size_t zero_tasks = 0;
  for (const auto& c : costs) zero_tasks += c.zero ? 1 : 0;

  const auto opt = [](const std::optional<double>& v) -> nlohmann::ordered_json {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };

  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kToolVersion;
  j["seed"] = scenario.seed;
  j["makespan_seconds"] = result.makespan;
  j["ideal_makespan_seconds"] = ideal;
  j["defects"] = {{"events_total", defects.events_total},
                  {"events_succeeded", result.events_succeeded},
                  {"events_lost", defects.events_lost},
                  {"events_corrupted", defects.events_corrupted},
                  {"events_recovery_queue", defects.events_recovery_queue},
                  {"defect_rate", defects.defect_rate},
                  {"defect_rate_after_recovery", defects.defect_rate_after_recovery},
                  {"sigma_math", opt(defects.sigma_math)},
                  {"sigma_industrial", opt(defects.sigma_industrial)}};
  j["overhead"] = {{"cpu_overhead", overhead.cpu_overhead},
                   {"time_overhead", overhead.time_overhead}};
  j["cpu"] = {{"successful_core_seconds", format_cpu_seconds(result.cpu_successful)},
              {"wasted_core_seconds", format_cpu_seconds(result.cpu_wasted)},
              {"successful_core_hours", to_core_hours(result.cpu_successful)},
              {"wasted_core_hours", to_core_hours(result.cpu_wasted)}};
  j["attempts"] = {{"total", result.attempts_total}, {"failed", result.failed_attempts}};
  j["recovery_samples"] = {{"tasks", costs.size()}, {"zero_excluded", zero_tasks}};
  j["scenario"] = scenario_json(scenario);
  return j;
}

inline void write_recovery_csv(std::ostream& out, const std::vector<RecoveryCost>& costs) {
  out << kRecoveryCsvHeader << '\n';
  for (const auto& c : costs)
    out << c.task_id << ',' << detail::format_double(c.core_hours) << '\n';
}

inline void write_attempt_row(std::ostream& out, const Scenario& scenario,
                              const AttemptRecord& rec) {
  const Attempt& a = rec.attempt;
  const auto stage = failure_stage(a.outcome);
  out << rec.job_id << ',' << a.attempt_index << ',' << scenario.sites.at(a.site).site_id << ','
      << outcome_name(a.outcome) << ',' << (stage ? to_string(*stage) : "") << ','
      << format_cpu_seconds(a.cpu_consumed) << ',' << detail::format_double(a.wall_start) << ','
      << detail::format_double(a.wall_end) << ',' << a.events_corrupted << '\n';
}

}  // namespace gridsim
