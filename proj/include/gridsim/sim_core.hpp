#pragma once

#include <gridsim/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace gridsim {

using EventCount = std::uint64_t;
using JobId = std::uint64_t;
using TaskId = std::uint32_t;
using SiteIndex = std::uint32_t;

/// CPU ledger unit: integer core-microseconds, so that ledger sums are exact
/// regardless of summation order.
using CpuMicros = std::int64_t;

inline constexpr double kMicrosPerSecond = 1e6;
inline constexpr double kSecondsPerHour = 3600.0;

inline CpuMicros cpu_from_seconds(double core_seconds) {
  return static_cast<CpuMicros>(std::llround(core_seconds * kMicrosPerSecond));
}
inline constexpr double to_core_seconds(CpuMicros cpu) {
  return static_cast<double>(cpu) / kMicrosPerSecond;
}
inline constexpr double to_core_hours(CpuMicros cpu) {
  return to_core_seconds(cpu) / kSecondsPerHour;
}

struct DatasetSpec {
  EventCount total_events = 1;
  EventCount events_per_job = 1;
  double nominal_cpu_per_event = 1.0;  // core-seconds

  void validate() const {
    if (total_events < 1) throw ConfigError("dataset.total_events must be >= 1");
    if (events_per_job < 1) throw ConfigError("dataset.events_per_job must be >= 1");
    if (!(nominal_cpu_per_event > 0.0) || !std::isfinite(nominal_cpu_per_event))
      throw ConfigError("dataset.nominal_cpu_per_event must be > 0");
  }

  EventCount job_count() const {
    return (total_events + events_per_job - 1) / events_per_job;
  }

  bool operator==(const DatasetSpec&) const = default;
};

/// How much work survives a failed attempt.
///   TaskLevel:  a permanently lost job invalidates its whole task.
///   JobLevel:   a failed attempt loses all of its work.
///   EventLevel: events checkpointed before a compute failure are kept.
enum class CheckpointGranularity { TaskLevel, JobLevel, EventLevel };

enum class FailureStage { Setup, Compute, StageOut };

struct Success {
  bool operator==(const Success&) const = default;
};
struct TransientFailure {
  FailureStage stage;
  bool operator==(const TransientFailure&) const = default;
};
// The stage records where the failure was detected; it only affects cost.
struct PermanentFailure {
  FailureStage stage;
  bool operator==(const PermanentFailure&) const = default;
};

using Outcome = std::variant<Success, TransientFailure, PermanentFailure>;

inline bool is_success(const Outcome& o) { return std::holds_alternative<Success>(o); }

inline std::optional<FailureStage> failure_stage(const Outcome& o) {
  return std::visit(
      [](const auto& v) -> std::optional<FailureStage> {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Success>)
          return std::nullopt;
        else
          return v.stage;
      },
      o);
}

inline std::string_view to_string(FailureStage s) {
  switch (s) {
    case FailureStage::Setup: return "setup";
    case FailureStage::Compute: return "compute";
    case FailureStage::StageOut: return "stageout";
  }
  return "?";
}

inline std::string_view outcome_name(const Outcome& o) {
  switch (o.index()) {
    case 0: return "success";
    case 1: return "transient";
    default: return "permanent";
  }
}

inline std::string_view to_string(CheckpointGranularity g) {
  switch (g) {
    case CheckpointGranularity::TaskLevel: return "task";
    case CheckpointGranularity::JobLevel: return "job";
    case CheckpointGranularity::EventLevel: return "event";
  }
  return "?";
}

inline std::optional<CheckpointGranularity> parse_granularity(std::string_view s) {
  if (s == "task") return CheckpointGranularity::TaskLevel;
  if (s == "job") return CheckpointGranularity::JobLevel;
  if (s == "event") return CheckpointGranularity::EventLevel;
  return std::nullopt;
}

struct Attempt {
  std::uint32_t attempt_index = 0;
  SiteIndex site = 0;
  Outcome outcome = Success{};
  CpuMicros cpu_consumed = 0;
  // CPU spent on the events that reached a checkpoint (compute failures only).
  CpuMicros cpu_checkpointed = 0;
  double wall_start = 0.0;
  double wall_end = 0.0;
  EventCount events_processed = 0;     // events this attempt set out to process
  EventCount events_checkpointed = 0;  // completed before a compute failure
  EventCount events_corrupted = 0;     // silent, successful attempts only

  bool operator==(const Attempt&) const = default;
};

struct RetryPolicy {
  static constexpr std::uint32_t kMaxRetriesBound = 100;

  std::uint32_t max_retries = 3;  // re-tries after the first attempt
  double requeue_delay = 0.0;     // simulated seconds
  bool dedicated_recovery = false;

  void validate() const {
    if (max_retries > kMaxRetriesBound)
      throw ConfigError("retry.max_retries must be <= 100");
    if (!(requeue_delay >= 0.0) || !std::isfinite(requeue_delay))
      throw ConfigError("retry.requeue_delay must be >= 0");
  }

  bool operator==(const RetryPolicy&) const = default;
};

enum class JobState { Pending, Running, Succeeded, FailedTransient, LostPermanent, RecoveryQueue };

inline bool is_terminal(JobState s) {
  return s == JobState::Succeeded || s == JobState::LostPermanent ||
         s == JobState::RecoveryQueue;
}

struct Job {
  JobId job_id = 0;
  TaskId task_id = 0;
  EventCount n_events = 0;
  EventCount events_done = 0;
  JobState state = JobState::Pending;
  std::vector<Attempt> attempts;

  bool terminal() const { return is_terminal(state); }
  EventCount events_remaining() const { return n_events - events_done; }
};

enum class TaskState { Open, Complete, CompleteWithLoss };

struct Task {
  TaskId task_id = 0;
  std::vector<Job> jobs;
  CheckpointGranularity granularity = CheckpointGranularity::JobLevel;
  TaskState state = TaskState::Open;
};

/// Splits a dataset into jobs of `events_per_job` events; the last job takes
/// the remainder. Job ids are assigned consecutively from `first_job_id`.
inline Task split_task(const DatasetSpec& dataset, CheckpointGranularity granularity,
                       TaskId task_id = 0, JobId first_job_id = 0) {
  dataset.validate();
  Task task;
  task.task_id = task_id;
  task.granularity = granularity;
  const EventCount n_jobs = dataset.job_count();
  task.jobs.reserve(n_jobs);
  EventCount left = dataset.total_events;
  for (EventCount i = 0; i < n_jobs; ++i) {
    Job job;
    job.job_id = first_job_id + i;
    job.task_id = task_id;
    job.n_events = left < dataset.events_per_job ? left : dataset.events_per_job;
    left -= job.n_events;
    task.jobs.push_back(std::move(job));
  }
  return task;
}

/// Pending or FailedTransient -> Running.
inline void mark_running(Job& job) {
  if (job.state != JobState::Pending && job.state != JobState::FailedTransient)
    throw std::logic_error("job " + std::to_string(job.job_id) + " is not dispatchable");
  job.state = JobState::Running;
}

/// Records a finished attempt and advances the job's retry state machine.
inline Job apply_outcome(Job job, Attempt attempt, const RetryPolicy& policy,
                         CheckpointGranularity granularity) {
  if (job.state != JobState::Running)
    throw std::logic_error("apply_outcome: job " + std::to_string(job.job_id) +
                           " is not running");
  if (attempt.attempt_index != job.attempts.size())
    throw std::logic_error("apply_outcome: job " + std::to_string(job.job_id) +
                           " expected attempt " + std::to_string(job.attempts.size()) +
                           ", got " + std::to_string(attempt.attempt_index));

  const Outcome outcome = attempt.outcome;
  const EventCount checkpointed = attempt.events_checkpointed;
  job.attempts.push_back(std::move(attempt));

  const auto give_up = [&] {
    job.state = policy.dedicated_recovery ? JobState::RecoveryQueue : JobState::LostPermanent;
  };

  if (is_success(outcome)) {
    job.state = JobState::Succeeded;
    job.events_done = job.n_events;
  } else if (const auto* transient = std::get_if<TransientFailure>(&outcome)) {
    if (granularity == CheckpointGranularity::EventLevel) {
      if (transient->stage == FailureStage::Compute)
        job.events_done = std::min(job.n_events, job.events_done + checkpointed);
    } else {
      job.events_done = 0;
    }
    if (job.attempts.size() <= policy.max_retries)
      job.state = JobState::FailedTransient;
    else
      give_up();
  } else {
    if (granularity != CheckpointGranularity::EventLevel) job.events_done = 0;
    give_up();
  }
  return job;
}

/// CPU of an attempt that counts as useful work: all of it on success, the
/// checkpointed part of an event-level compute failure, nothing otherwise.
inline CpuMicros retained_cpu(const Attempt& attempt, CheckpointGranularity granularity) {
  if (is_success(attempt.outcome)) return attempt.cpu_consumed;
  if (granularity == CheckpointGranularity::EventLevel) {
    if (const auto* t = std::get_if<TransientFailure>(&attempt.outcome);
        t && t->stage == FailureStage::Compute)
      return std::min(attempt.cpu_checkpointed, attempt.cpu_consumed);
  }
  return 0;
}

inline TaskState task_state(const Task& task) {
  bool loss = false;
  for (const Job& job : task.jobs) {
    if (!job.terminal()) return TaskState::Open;
    if (job.state != JobState::Succeeded) loss = true;
  }
  return loss ? TaskState::CompleteWithLoss : TaskState::Complete;
}

}  // namespace gridsim
