#pragma once

#include <gridsim/errors.hpp>
#include <gridsim/failure_injection.hpp>
#include <gridsim/rng.hpp>
#include <gridsim/sim_core.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace gridsim {

/// Complete declarative input of one simulated campaign.
struct Scenario {
  DatasetSpec dataset;
  std::vector<SiteProfile> sites;
  FailureModel failure_model;
  RetryPolicy retry_policy;
  CheckpointGranularity granularity = CheckpointGranularity::JobLevel;
  std::uint64_t seed = 1;
  // The dataset is divided evenly over this many independent tasks.
  std::uint32_t n_tasks = 1;

  void validate() const {
    dataset.validate();
    failure_model.validate();
    retry_policy.validate();
    if (sites.empty()) throw ConfigError("scenario needs at least one [[site]]");
    std::set<std::string> ids;
    for (const auto& site : sites) {
      site.validate();
      if (!ids.insert(site.site_id).second)
        throw ConfigError("duplicate site.site_id '" + site.site_id + "'");
    }
    if (n_tasks < 1) throw ConfigError("run.n_tasks must be >= 1");
    if (n_tasks > dataset.total_events)
      throw ConfigError("run.n_tasks must not exceed dataset.total_events");
  }

  bool operator==(const Scenario&) const = default;
};

/// Per-task datasets: total events spread evenly, earlier tasks take the
/// remainder one event each.
inline std::vector<DatasetSpec> task_datasets(const Scenario& scenario) {
  std::vector<DatasetSpec> out;
  const EventCount base = scenario.dataset.total_events / scenario.n_tasks;
  const EventCount extra = scenario.dataset.total_events % scenario.n_tasks;
  for (std::uint32_t i = 0; i < scenario.n_tasks; ++i) {
    DatasetSpec d = scenario.dataset;
    d.total_events = base + (i < extra ? 1 : 0);
    out.push_back(d);
  }
  return out;
}

struct AttemptRecord {
  JobId job_id = 0;
  TaskId task_id = 0;
  Attempt attempt;

  bool operator==(const AttemptRecord&) const = default;
};

struct SimResult {
  std::vector<Task> tasks;
  double makespan = 0.0;  // simulated seconds

  // Useful CPU (successful attempts plus retained event-level checkpoints)
  // and CPU burnt by failures. Their sum is the total attempt CPU.
  CpuMicros cpu_successful = 0;
  CpuMicros cpu_wasted = 0;

  EventCount events_total = 0;
  EventCount events_succeeded = 0;
  EventCount events_lost = 0;
  EventCount events_corrupted = 0;
  EventCount events_recovery_queue = 0;

  std::uint64_t attempts_total = 0;
  std::uint64_t failed_attempts = 0;

  std::vector<CpuMicros> per_task_recovery_cpu;  // indexed by task_id
  std::vector<AttemptRecord> attempt_log;         // completion order
};

struct RunOptions {
  bool keep_attempt_log = true;
  // Called once per completed attempt in completion order.
  std::function<void(const AttemptRecord&)> attempt_sink;
};

namespace detail {

struct Completion {
  double time;
  std::uint32_t site_rank;
  JobId job_id;
  Attempt attempt;
};

struct CompletionLater {
  bool operator()(const Completion& a, const Completion& b) const {
    if (a.time != b.time) return a.time > b.time;
    if (a.site_rank != b.site_rank) return a.site_rank > b.site_rank;
    return a.job_id > b.job_id;
  }
};

struct Eligible {
  double time;
  JobId job_id;
  bool operator>(const Eligible& o) const {
    return time != o.time ? time > o.time : job_id > o.job_id;
  }
};

}  // namespace detail

/// Runs the campaign until every job is terminal.
///
/// Scheduling rules (all deterministic):
///  - pending jobs are ordered by (eligible_time, job_id);
///  - free slots are filled on sites in ascending site_id order;
///  - completions are processed in (time, site_id, job_id) order, and all
///    completions at an instant are processed before dispatching at it.
inline SimResult run(const Scenario& scenario, const RunOptions& options = {}) {
  scenario.validate();

  const auto& model = scenario.failure_model;
  const auto& policy = scenario.retry_policy;
  const auto granularity = scenario.granularity;
  const double cpu_per_event = scenario.dataset.nominal_cpu_per_event;

  SimResult result;
  result.events_total = scenario.dataset.total_events;

  JobId next_job = 0;
  TaskId next_task = 0;
  for (const auto& d : task_datasets(scenario)) {
    result.tasks.push_back(split_task(d, granularity, next_task++, next_job));
    next_job += result.tasks.back().jobs.size();
  }
  result.per_task_recovery_cpu.assign(result.tasks.size(), 0);

  std::vector<Job*> job_by_id;
  job_by_id.reserve(next_job);
  for (auto& task : result.tasks)
    for (auto& job : task.jobs) job_by_id.push_back(&job);

  // rank -> index into scenario.sites, ordered by site_id
  std::vector<SiteIndex> site_order(scenario.sites.size());
  std::iota(site_order.begin(), site_order.end(), SiteIndex{0});
  std::sort(site_order.begin(), site_order.end(), [&](SiteIndex a, SiteIndex b) {
    return scenario.sites[a].site_id < scenario.sites[b].site_id;
  });
  std::vector<std::uint32_t> free_slots;
  std::uint64_t total_free = 0;
  for (SiteIndex idx : site_order) {
    free_slots.push_back(scenario.sites[idx].slots);
    total_free += scenario.sites[idx].slots;
  }

  std::priority_queue<detail::Eligible, std::vector<detail::Eligible>, std::greater<>> pending;
  for (JobId id = 0; id < next_job; ++id) pending.push({0.0, id});

  std::priority_queue<detail::Completion, std::vector<detail::Completion>,
                      detail::CompletionLater>
      running;

  const auto dispatch = [&](double now) {
    std::uint32_t rank = 0;
    while (total_free > 0 && !pending.empty() && pending.top().time <= now) {
      const JobId id = pending.top().job_id;
      pending.pop();
      while (free_slots[rank] == 0) ++rank;
      const SiteIndex site_idx = site_order[rank];
      const SiteProfile& site = scenario.sites[site_idx];

      Job& job = *job_by_id[id];
      mark_running(job);
      const auto attempt_index = static_cast<std::uint32_t>(job.attempts.size());
      const AttemptDraft draft =
          sample_attempt(model, site, job.events_remaining(), cpu_per_event,
                         RngStream::for_attempt(scenario.seed, id, attempt_index));

      Attempt a;
      a.attempt_index = attempt_index;
      a.site = site_idx;
      a.outcome = draft.outcome;
      a.cpu_consumed = draft.cpu_consumed;
      a.cpu_checkpointed = draft.cpu_checkpointed;
      a.wall_start = now;
      a.wall_end = now + draft.wall_duration;
      a.events_processed = job.events_remaining();
      a.events_checkpointed = draft.events_checkpointed;
      a.events_corrupted = draft.events_corrupted;

      --free_slots[rank];
      --total_free;
      running.push({a.wall_end, rank, id, a});
    }
  };

  const auto complete = [&](detail::Completion&& c) {
    ++free_slots[c.site_rank];
    ++total_free;
    Job& job = *job_by_id[c.job_id];

    const CpuMicros retained = retained_cpu(c.attempt, granularity);
    const CpuMicros wasted = c.attempt.cpu_consumed - retained;
    result.cpu_successful += retained;
    result.cpu_wasted += wasted;
    result.per_task_recovery_cpu[job.task_id] += wasted;
    result.events_corrupted += c.attempt.events_corrupted;
    result.makespan = std::max(result.makespan, c.attempt.wall_end);
    ++result.attempts_total;
    if (!is_success(c.attempt.outcome)) ++result.failed_attempts;

    if (options.keep_attempt_log || options.attempt_sink) {
      AttemptRecord rec{job.job_id, job.task_id, c.attempt};
      if (options.attempt_sink) options.attempt_sink(rec);
      if (options.keep_attempt_log) result.attempt_log.push_back(std::move(rec));
    }

    job = apply_outcome(std::move(job), std::move(c.attempt), policy, granularity);
    if (job.state == JobState::FailedTransient)
      pending.push({c.time + policy.requeue_delay, job.job_id});
  };

  double now = 0.0;
  while (true) {
    dispatch(now);
    if (running.empty() && pending.empty()) break;

    double next = running.empty() ? pending.top().time : running.top().time;
    if (total_free > 0 && !pending.empty()) next = std::min(next, pending.top().time);
    now = next;

    while (!running.empty() && running.top().time == now) {
      auto c = running.top();
      running.pop();
      complete(std::move(c));
    }
  }

  for (auto& task : result.tasks) {
    task.state = task_state(task);
    const bool task_invalidated = granularity == CheckpointGranularity::TaskLevel &&
                                  task.state == TaskState::CompleteWithLoss;
    for (const auto& job : task.jobs) {
      switch (job.state) {
        case JobState::Succeeded:
          (task_invalidated ? result.events_lost : result.events_succeeded) += job.n_events;
          break;
        case JobState::LostPermanent: result.events_lost += job.n_events; break;
        case JobState::RecoveryQueue: result.events_recovery_queue += job.n_events; break;
        default: throw std::logic_error("run: job left non-terminal");
      }
    }
  }
  return result;
}

/// Makespan of the same scenario with every failure probability set to zero.
inline double ideal_makespan(const Scenario& scenario) {
  Scenario ideal = scenario;
  ideal.failure_model.p_setup = 0.0;
  ideal.failure_model.p_compute = 0.0;
  ideal.failure_model.p_stageout = 0.0;
  ideal.failure_model.corruption_per_event = 0.0;
  RunOptions options;
  options.keep_attempt_log = false;
  return run(ideal, options).makespan;
}

}  // namespace gridsim
