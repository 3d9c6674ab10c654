#pragma once

#include <gridsim/engine.hpp>
#include <gridsim/errors.hpp>
#include <gridsim/sim_core.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace gridsim {

/// Industrial sigma levels carry the conventional 1.5 sigma process-drift
/// shift on top of the mathematical (one-sided Gaussian tail) level.
enum class SigmaConvention { Mathematical, Industrial };

inline constexpr double kIndustrialShift = 1.5;

inline double convention_shift(SigmaConvention c) {
  return c == SigmaConvention::Industrial ? kIndustrialShift : 0.0;
}

/// One-sided upper Gaussian tail Q(z) = P(Z > z). Uses erfc directly so the
/// far tail keeps full relative precision.
inline double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

inline double gaussian_density(double z) {
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

namespace detail {

// Abramowitz & Stegun 26.2.23, |error| < 4.5e-4. Starting point only.
inline double tail_quantile_guess(double rate) {
  const double p = rate < 0.5 ? rate : 1.0 - rate;
  const double t = std::sqrt(-2.0 * std::log(p));
  const double z = t - (2.515517 + t * (0.802853 + t * 0.010328)) /
                           (1.0 + t * (1.432788 + t * (0.189269 + t * 0.001308)));
  return rate < 0.5 ? z : -z;
}

}  // namespace detail

/// Sigma level z with Q(z) = rate (plus 1.5 for the industrial convention).
inline double sigma_from_rate(double rate, SigmaConvention convention) {
  if (!(rate > 0.0 && rate < 1.0))
    throw DomainError("sigma_from_rate: rate must lie in (0, 1), got " + std::to_string(rate));
  if (rate == 0.5) return convention_shift(convention);

  // Newton on log Q(z) - log rate, which is close to linear in the tail.
  const double target = std::log(rate);
  double z = detail::tail_quantile_guess(rate);
  for (int i = 0; i < 60; ++i) {
    const double q = upper_tail(z);
    const double f = std::log(q) - target;
    const double slope = -gaussian_density(z) / q;
    const double step = f / slope;
    z -= step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(z))) break;
  }
  return z + convention_shift(convention);
}

/// Inverse of sigma_from_rate. The effective mathematical sigma must be >= 0.
inline double rate_from_sigma(double sigma, SigmaConvention convention) {
  const double z = sigma - convention_shift(convention);
  if (!(z >= 0.0) || !std::isfinite(z))
    throw DomainError("rate_from_sigma: effective mathematical sigma must be >= 0, got " +
                      std::to_string(z));
  return upper_tail(z);
}

struct DefectReport {
  EventCount events_total = 0;
  EventCount events_lost = 0;
  EventCount events_corrupted = 0;
  EventCount events_recovery_queue = 0;
  double defect_rate = 0.0;                 // before the dedicated recovery step
  double defect_rate_after_recovery = 0.0;  // recovery-queued events excluded
  // Empty when the corresponding rate is zero (unbounded sigma).
  std::optional<double> sigma_math;
  std::optional<double> sigma_industrial;
};

inline double defect_rate(const SimResult& r) {
  if (r.events_total < 1) throw DomainError("defect_rate: events_total must be >= 1");
  return static_cast<double>(r.events_lost + r.events_corrupted + r.events_recovery_queue) /
         static_cast<double>(r.events_total);
}

inline DefectReport defect_report(const SimResult& r) {
  DefectReport d;
  d.events_total = r.events_total;
  d.events_lost = r.events_lost;
  d.events_corrupted = r.events_corrupted;
  d.events_recovery_queue = r.events_recovery_queue;
  d.defect_rate = defect_rate(r);
  d.defect_rate_after_recovery =
      static_cast<double>(r.events_lost + r.events_corrupted) / static_cast<double>(r.events_total);
  if (d.defect_rate > 0.0 && d.defect_rate < 1.0) {
    d.sigma_math = sigma_from_rate(d.defect_rate, SigmaConvention::Mathematical);
    d.sigma_industrial = *d.sigma_math + kIndustrialShift;
  }
  return d;
}

struct OverheadReport {
  double cpu_overhead = 0.0;   // wasted / successful CPU
  double time_overhead = 0.0;  // (makespan - ideal) / ideal
};

inline OverheadReport overhead_report(const SimResult& r, double ideal_makespan) {
  if (r.cpu_successful <= 0) throw NumericError("overhead_report: no successful CPU recorded");
  if (!(ideal_makespan > 0.0)) throw NumericError("overhead_report: ideal makespan must be > 0");
  OverheadReport o;
  o.cpu_overhead = static_cast<double>(r.cpu_wasted) / static_cast<double>(r.cpu_successful);
  o.time_overhead = (r.makespan - ideal_makespan) / ideal_makespan;
  return o;
}

struct RecoveryCost {
  TaskId task_id = 0;
  CpuMicros cpu = 0;
  double core_hours = 0.0;
  bool zero = true;  // no failures: excluded from distribution fitting
};

/// CPU burnt by failed attempts, one entry per task.
inline std::vector<RecoveryCost> recovery_cost_samples(const SimResult& r) {
  std::vector<RecoveryCost> out;
  out.reserve(r.per_task_recovery_cpu.size());
  for (std::size_t i = 0; i < r.per_task_recovery_cpu.size(); ++i) {
    const CpuMicros cpu = r.per_task_recovery_cpu[i];
    out.push_back({static_cast<TaskId>(i), cpu, to_core_hours(cpu), cpu == 0});
  }
  return out;
}

/// Non-zero core-hour values ready for fitting.
inline std::vector<double> fit_ready(const std::vector<RecoveryCost>& costs) {
  std::vector<double> out;
  for (const auto& c : costs)
    if (!c.zero) out.push_back(c.core_hours);
  return out;
}

}  // namespace gridsim
