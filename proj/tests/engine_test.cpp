#include <gridsim/engine.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace gridsim {
namespace {

Scenario basic(EventCount jobs, EventCount events_per_job = 1, double cpu_per_event = 3600.0,
               std::uint32_t slots = 10) {
  Scenario s;
  s.dataset = {jobs * events_per_job, events_per_job, cpu_per_event};
  s.sites = {{"site-a", slots, 1.0, 1.0}};
  s.seed = 7;
  return s;
}

RunOptions no_log() {
  RunOptions o;
  o.keep_attempt_log = false;
  return o;
}

void expect_ledgers(const SimResult& r) {
  EXPECT_EQ(r.events_lost + r.events_recovery_queue + r.events_succeeded, r.events_total);
  CpuMicros total = 0;
  for (const auto& task : r.tasks)
    for (const auto& job : task.jobs)
      for (const auto& a : job.attempts) total += a.cpu_consumed;
  EXPECT_EQ(r.cpu_successful + r.cpu_wasted, total);
  EXPECT_EQ(std::accumulate(r.per_task_recovery_cpu.begin(), r.per_task_recovery_cpu.end(),
                            CpuMicros{0}),
            r.cpu_wasted);
}

TEST(Run, ZeroFailureBinPacking) {
  const Scenario s = basic(100);
  const SimResult r = run(s);
  EXPECT_DOUBLE_EQ(r.makespan, 10 * 3600.0);
  EXPECT_EQ(r.cpu_wasted, 0);
  EXPECT_EQ(r.events_lost, 0u);
  EXPECT_EQ(r.attempts_total, 100u);
  EXPECT_EQ(r.tasks[0].state, TaskState::Complete);
  expect_ledgers(r);
}

TEST(IdealMakespan, Waves) {
  EXPECT_DOUBLE_EQ(ideal_makespan(basic(100)), 10 * 3600.0);
  EXPECT_DOUBLE_EQ(ideal_makespan(basic(10, 1, 3600.0, 3)), 4 * 3600.0);
}

TEST(IdealMakespan, EqualsRunWithZeroedModelOnHeterogeneousSites) {
  Scenario s = basic(257, 40, 2.5);
  s.sites = {{"b-slow", 7, 0.6, 2.0}, {"a-fast", 5, 1.7, 0.5}};
  s.failure_model.p_compute = 0.2;
  s.failure_model.p_stageout = 0.1;
  s.retry_policy.requeue_delay = 30.0;
  Scenario zeroed = s;
  zeroed.failure_model = FailureModel{};
  EXPECT_DOUBLE_EQ(ideal_makespan(s), run(zeroed, no_log()).makespan);
  EXPECT_GE(run(s, no_log()).makespan, ideal_makespan(s));
}

TEST(Run, SitesFilledInSiteIdOrder) {
  Scenario s = basic(3, 1, 10.0, 1);
  s.sites = {{"zeta", 2, 1.0, 1.0}, {"alpha", 1, 1.0, 1.0}};
  const SimResult r = run(s);
  std::map<JobId, SiteIndex> where;
  for (const auto& rec : r.attempt_log) where[rec.job_id] = rec.attempt.site;
  EXPECT_EQ(s.sites[where[0]].site_id, "alpha");
  EXPECT_EQ(s.sites[where[1]].site_id, "zeta");
  EXPECT_EQ(s.sites[where[2]].site_id, "zeta");
}

TEST(Run, SpeedFactorScalesWallTime) {
  Scenario s = basic(4, 1, 100.0, 4);
  s.sites[0].speed_factor = 4.0;
  EXPECT_DOUBLE_EQ(run(s).makespan, 25.0);
}

TEST(Run, RetryLossFollowsGeometricLaw) {
  Scenario s = basic(100'000, 1, 1.0, 1000);
  s.failure_model.p_stageout = 0.1;
  s.retry_policy.max_retries = 3;
  const SimResult r = run(s, no_log());
  const double loss = double(r.events_lost) / double(r.events_total);
  const double p = 1e-4;
  EXPECT_NEAR(loss, p, 3 * std::sqrt(p * (1 - p) / 1e5));
  expect_ledgers(r);
}

TEST(Run, DeterministicAttemptLog) {
  Scenario s = basic(500, 20, 1.0, 16);
  s.sites.push_back({"site-b", 5, 2.0, 3.0});
  s.failure_model = {0.02, 0.05, 0.04, 0.1, 1e-4, 0.01};
  s.retry_policy = {4, 12.0, true};
  const SimResult a = run(s), b = run(s);
  EXPECT_EQ(a.attempt_log, b.attempt_log);
  EXPECT_EQ(a.makespan, b.makespan);
  s.seed += 1;
  EXPECT_NE(run(s).attempt_log, a.attempt_log);
}

TEST(Run, AttemptIndicesHaveNoGaps) {
  Scenario s = basic(300, 10, 1.0, 7);
  s.failure_model.p_compute = 0.3;
  s.retry_policy.max_retries = 5;
  const SimResult r = run(s);
  for (const auto& job : r.tasks[0].jobs) {
    ASSERT_FALSE(job.attempts.empty());
    ASSERT_LE(job.attempts.size(), 6u);
    for (std::size_t i = 0; i < job.attempts.size(); ++i)
      ASSERT_EQ(job.attempts[i].attempt_index, i);
    ASSERT_TRUE(job.terminal());
  }
  expect_ledgers(r);
}

TEST(Run, AttemptSinkSeesTheLog) {
  Scenario s = basic(50, 5, 1.0, 3);
  s.failure_model.p_stageout = 0.2;
  std::vector<AttemptRecord> streamed;
  RunOptions o;
  o.attempt_sink = [&](const AttemptRecord& r) { streamed.push_back(r); };
  const SimResult r = run(s, o);
  EXPECT_EQ(streamed, r.attempt_log);
}

// No slot may be idle while an eligible job waits.
TEST(Run, WorkConservation) {
  Scenario s = basic(120, 3, 7.0, 4);
  s.sites.push_back({"site-b", 3, 1.5, 1.0});
  s.failure_model.p_compute = 0.15;
  s.failure_model.p_stageout = 0.1;
  s.retry_policy = {6, 5.0, false};
  const SimResult r = run(s);
  const std::uint32_t slots = 7;

  std::map<JobId, std::vector<const Attempt*>> by_job;
  for (const auto& rec : r.attempt_log) by_job[rec.job_id].push_back(&rec.attempt);
  std::vector<double> points;
  for (const auto& rec : r.attempt_log) {
    points.push_back(rec.attempt.wall_start);
    points.push_back(rec.attempt.wall_end);
  }
  const auto busy_at = [&](double t) {
    std::uint32_t n = 0;
    for (const auto& rec : r.attempt_log)
      n += rec.attempt.wall_start <= t && t < rec.attempt.wall_end;
    return n;
  };
  for (const auto& [id, attempts] : by_job) {
    for (std::size_t i = 0; i < attempts.size(); ++i) {
      const double eligible = i == 0 ? 0.0 : attempts[i - 1]->wall_end + s.retry_policy.requeue_delay;
      const double start = attempts[i]->wall_start;
      ASSERT_GE(start, eligible);
      for (double t : points) {
        if (t >= eligible && t < start) {
          ASSERT_EQ(busy_at(t), slots) << "job " << id << " t=" << t;
        }
      }
    }
  }
}

TEST(Run, RequeueDelayIsHonoured) {
  Scenario s = basic(1, 1, 10.0, 1);
  s.failure_model.p_stageout = 1.0;
  s.retry_policy = {4, 100.0, false};
  const SimResult r = run(s);
  const auto& attempts = r.tasks[0].jobs[0].attempts;
  ASSERT_EQ(attempts.size(), 5u);
  for (std::size_t i = 1; i < attempts.size(); ++i)
    EXPECT_DOUBLE_EQ(attempts[i].wall_start, attempts[i - 1].wall_end + 100.0);
}

TEST(Run, MoreRetriesNeverLoseMore) {
  Scenario s = basic(20'000, 1, 1.0, 50);
  s.failure_model.p_setup = 0.1;
  s.failure_model.p_stageout = 0.2;
  EventCount previous = s.dataset.total_events + 1;
  for (std::uint32_t retries = 0; retries <= 6; ++retries) {
    s.retry_policy.max_retries = retries;
    const EventCount lost = run(s, no_log()).events_lost;
    EXPECT_LE(lost, previous) << "max_retries=" << retries;
    previous = lost;
  }
}

TEST(Run, TimeOverheadPositivity) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Scenario s = basic(200, 1, 100.0, 8);
    s.seed = seed;
    s.failure_model.p_stageout = 0.05;
    s.retry_policy.requeue_delay = 10.0;
    const SimResult r = run(s, no_log());
    const double ideal = ideal_makespan(s);
    if (r.cpu_wasted > 0)
      EXPECT_GE(r.makespan, ideal);
    else
      EXPECT_EQ(r.makespan, ideal);
  }
  Scenario clean = basic(33, 1, 100.0, 8);
  EXPECT_EQ(run(clean, no_log()).makespan, ideal_makespan(clean));
}

double overhead(const SimResult& r) { return double(r.cpu_wasted) / double(r.cpu_successful); }

TEST(Run, StageOutOverheadOracle) {
  constexpr double p = 0.08;
  constexpr double n = 30'000;
  Scenario s = basic(EventCount(n), 10, 1.0, 500);
  s.failure_model.p_stageout = p;
  s.retry_policy.max_retries = 100;
  const SimResult r = run(s, no_log());
  // failures per job ~ Geometric: mean p/(1-p), variance p/(1-p)^2
  const double se = std::sqrt(p) / (1 - p) / std::sqrt(n);
  EXPECT_NEAR(overhead(r), p / (1 - p), 3 * se);
  EXPECT_EQ(r.events_lost, 0u);
}

TEST(Run, ComputeOverheadOracle) {
  constexpr double p = 0.08;
  constexpr double n = 30'000;
  Scenario s = basic(EventCount(n), 10, 1.0, 500);
  s.failure_model.p_compute = p;
  s.retry_policy.max_retries = 100;
  const SimResult r = run(s, no_log());
  const double g = p / (1 - p);
  const double var = g / 12.0 + 0.25 * p / ((1 - p) * (1 - p));
  EXPECT_NEAR(overhead(r), 0.5 * g, 3 * std::sqrt(var / n));
}

TEST(Run, EventLevelDominatesJobLevel) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Scenario s = basic(2000, 500, 0.5, 64);
    s.seed = seed;
    s.failure_model = {0.01, 0.08, 0.03, 0.0, 0.0, 0.01};
    s.retry_policy.max_retries = 10;
    s.granularity = CheckpointGranularity::JobLevel;
    const SimResult job_level = run(s, no_log());
    s.granularity = CheckpointGranularity::EventLevel;
    const SimResult event_level = run(s, no_log());
    EXPECT_LE(event_level.cpu_wasted, job_level.cpu_wasted);
    EXPECT_LE(overhead(event_level), overhead(job_level));
    expect_ledgers(event_level);
  }
}

TEST(Run, EventLevelCheckpointCarriesOver) {
  // Find a job whose first attempt fails in compute and then succeeds.
  Scenario s = basic(1, 6000, 1.0, 1);
  s.granularity = CheckpointGranularity::EventLevel;
  s.failure_model.p_compute = 0.5;
  bool found = false;
  for (std::uint64_t seed = 0; seed < 200 && !found; ++seed) {
    s.seed = seed;
    const SimResult r = run(s);
    const auto& job = r.tasks[0].jobs[0];
    if (job.attempts.size() != 2 || job.state != JobState::Succeeded) continue;
    found = true;
    const Attempt& first = job.attempts[0];
    const Attempt& second = job.attempts[1];
    ASSERT_EQ(first.outcome, Outcome{TransientFailure{FailureStage::Compute}});
    EXPECT_EQ(second.events_processed, 6000 - first.events_checkpointed);
    // useful CPU is exactly the job's nominal CPU; waste is under one event
    EXPECT_NEAR(to_core_seconds(r.cpu_successful), 6000.0, 2e-6);
    EXPECT_LT(to_core_seconds(r.cpu_wasted), 1.0 + 1e-6);
    EXPECT_EQ(r.cpu_successful + r.cpu_wasted, first.cpu_consumed + second.cpu_consumed);
  }
  EXPECT_TRUE(found);
}

TEST(Run, TaskLevelLossInvalidatesWholeTask) {
  Scenario s = basic(40, 10, 1.0, 8);
  s.n_tasks = 4;
  s.granularity = CheckpointGranularity::TaskLevel;
  s.failure_model.p_stageout = 0.3;
  s.retry_policy.max_retries = 0;
  const SimResult r = run(s, no_log());
  for (const auto& task : r.tasks) {
    if (task.state == TaskState::CompleteWithLoss) {
      for (const auto& job : task.jobs) EXPECT_TRUE(job.terminal());
    }
  }
  EventCount expected_succeeded = 0;
  for (const auto& task : r.tasks)
    if (task.state == TaskState::Complete)
      for (const auto& job : task.jobs) expected_succeeded += job.n_events;
  EXPECT_EQ(r.events_succeeded, expected_succeeded);
  expect_ledgers(r);
}

TEST(Run, MultiTaskRecoverySamplesPerTask) {
  Scenario s = basic(1000, 10, 1.0, 20);
  s.n_tasks = 7;
  s.failure_model.p_stageout = 0.1;
  const SimResult r = run(s, no_log());
  ASSERT_EQ(r.tasks.size(), 7u);
  ASSERT_EQ(r.per_task_recovery_cpu.size(), 7u);
  EventCount events = 0;
  for (const auto& t : r.tasks)
    for (const auto& j : t.jobs) events += j.n_events;
  EXPECT_EQ(events, s.dataset.total_events);
  expect_ledgers(r);
}

TEST(Run, RejectsInvalidScenarios) {
  Scenario s = basic(10);
  s.sites.clear();
  EXPECT_THROW(run(s), ConfigError);
  s = basic(10);
  s.sites.push_back(s.sites[0]);
  EXPECT_THROW(run(s), ConfigError);
  s = basic(10);
  s.failure_model.p_compute = 1.5;
  EXPECT_THROW(run(s), ConfigError);
  s = basic(10);
  s.retry_policy.max_retries = 101;
  EXPECT_THROW(run(s), ConfigError);
  s = basic(10);
  s.n_tasks = 11;
  EXPECT_THROW(run(s), ConfigError);
}

}  // namespace
}  // namespace gridsim
