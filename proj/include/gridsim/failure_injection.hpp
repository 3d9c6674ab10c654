#pragma once

#include <gridsim/errors.hpp>
#include <gridsim/rng.hpp>
#include <gridsim/sim_core.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace gridsim {

/// Stage-wise failure probabilities. Each stage probability is conditional on
/// the attempt reaching that stage.
struct FailureModel {
  double p_setup = 0.0;
  double p_compute = 0.0;
  double p_stageout = 0.0;
  double permanent_fraction = 0.0;
  double corruption_per_event = 0.0;
  double c_setup = 0.01;  // fraction of nominal attempt CPU burnt by a setup failure

  void validate() const {
    const auto check = [](double v, const char* key) {
      if (!(v >= 0.0 && v <= 1.0))
        throw ConfigError(std::string("failure.") + key + " out of range [0, 1]");
    };
    check(p_setup, "p_setup");
    check(p_compute, "p_compute");
    check(p_stageout, "p_stageout");
    check(permanent_fraction, "permanent_fraction");
    check(corruption_per_event, "corruption_per_event");
    check(c_setup, "c_setup");
  }

  bool operator==(const FailureModel&) const = default;
};

struct SiteProfile {
  std::string site_id;
  std::uint32_t slots = 1;
  double speed_factor = 1.0;
  double failure_multiplier = 1.0;

  void validate() const {
    if (site_id.empty()) throw ConfigError("site.site_id must not be empty");
    if (slots < 1) throw ConfigError("site.slots must be >= 1 (site " + site_id + ")");
    if (!(speed_factor > 0.0) || !std::isfinite(speed_factor))
      throw ConfigError("site.speed_factor must be > 0 (site " + site_id + ")");
    if (!(failure_multiplier >= 0.0) || !std::isfinite(failure_multiplier))
      throw ConfigError("site.failure_multiplier must be >= 0 (site " + site_id + ")");
  }

  bool operator==(const SiteProfile&) const = default;
};

/// Per-stage probabilities after applying the site multiplier, clamped to 1.
inline std::array<double, 3> effective_stage_probs(const FailureModel& model,
                                                   const SiteProfile& site) {
  const double m = site.failure_multiplier;
  return {std::min(1.0, model.p_setup * m), std::min(1.0, model.p_compute * m),
          std::min(1.0, model.p_stageout * m)};
}

inline double overall_failure_prob(const FailureModel& model, const SiteProfile& site) {
  double survive = 1.0;
  for (double p : effective_stage_probs(model, site)) survive *= 1.0 - p;
  return 1.0 - survive;
}

struct AttemptDraft {
  Outcome outcome = Success{};
  CpuMicros cpu_consumed = 0;
  CpuMicros cpu_checkpointed = 0;
  double wall_duration = 0.0;
  EventCount events_checkpointed = 0;
  EventCount events_corrupted = 0;

  bool operator==(const AttemptDraft&) const = default;
};

/// Draws the outcome of one attempt.
///
/// Draw layout is fixed regardless of the outcome: three stage uniforms, one
/// partial-progress uniform, one permanence uniform, then the corruption
/// draws. Two attempts sharing a stream therefore fail at the same stage even
/// when they process different event counts.
inline AttemptDraft sample_attempt(const FailureModel& model, const SiteProfile& site,
                                   EventCount events_to_process, double cpu_per_event,
                                   RngStream rng) {
  const auto probs = effective_stage_probs(model, site);
  std::array<double, 3> stage_u{};
  for (double& u : stage_u) u = rng.uniform();
  const double progress = rng.uniform();
  const double permanence = rng.uniform();

  const double nominal = static_cast<double>(events_to_process) * cpu_per_event;
  AttemptDraft draft;

  int failed_stage = -1;
  for (int s = 0; s < 3; ++s) {
    if (stage_u[s] < probs[s]) {
      failed_stage = s;
      break;
    }
  }

  if (failed_stage < 0) {
    draft.outcome = Success{};
    draft.cpu_consumed = cpu_from_seconds(nominal);
    draft.events_corrupted = rng.binomial(events_to_process, model.corruption_per_event);
  } else {
    const auto stage = static_cast<FailureStage>(failed_stage);
    switch (stage) {
      case FailureStage::Setup:
        draft.cpu_consumed = cpu_from_seconds(model.c_setup * nominal);
        break;
      case FailureStage::Compute: {
        draft.cpu_consumed = cpu_from_seconds(progress * nominal);
        draft.events_checkpointed = static_cast<EventCount>(
            std::floor(progress * static_cast<double>(events_to_process)));
        draft.events_checkpointed = std::min(draft.events_checkpointed, events_to_process);
        draft.cpu_checkpointed = std::min(
            draft.cpu_consumed,
            cpu_from_seconds(static_cast<double>(draft.events_checkpointed) * cpu_per_event));
        break;
      }
      case FailureStage::StageOut:
        draft.cpu_consumed = cpu_from_seconds(nominal);
        break;
    }
    if (permanence < model.permanent_fraction)
      draft.outcome = PermanentFailure{stage};
    else
      draft.outcome = TransientFailure{stage};
  }
  draft.wall_duration = to_core_seconds(draft.cpu_consumed) / site.speed_factor;
  return draft;
}

}  // namespace gridsim
