#pragma once

#include <gridsim/errors.hpp>
#include <gridsim/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gridsim::weibull {

struct WeibullParams {
  double shape = 1.0;  // k
  double scale = 1.0;  // lambda

  void validate() const {
    if (!(shape > 0.0) || !std::isfinite(shape)) throw DomainError("weibull: shape must be > 0");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("weibull: scale must be > 0");
  }
  bool operator==(const WeibullParams&) const = default;
};

inline void check_support(double x) {
  if (!(x >= 0.0)) throw DomainError("weibull: x must be >= 0");
}

inline double log_pdf(double x, const WeibullParams& p) {
  check_support(x);
  const double k = p.shape;
  if (x == 0.0) {
    if (k < 1.0) return std::numeric_limits<double>::infinity();
    if (k > 1.0) return -std::numeric_limits<double>::infinity();
    return -std::log(p.scale);
  }
  const double lz = std::log(x / p.scale);
  return std::log(k / p.scale) + (k - 1.0) * lz - std::exp(k * lz);
}

inline double pdf(double x, const WeibullParams& p) {
  check_support(x);
  if (x == 0.0) {
    if (p.shape < 1.0) return std::numeric_limits<double>::infinity();
    return p.shape > 1.0 ? 0.0 : 1.0 / p.scale;
  }
  return std::exp(log_pdf(x, p));
}

inline double cdf(double x, const WeibullParams& p) {
  check_support(x);
  return -std::expm1(-std::pow(x / p.scale, p.shape));
}

/// Inverse-CDF draw.
inline double sample(const WeibullParams& p, RngStream& rng) {
  return p.scale * std::pow(-std::log(rng.uniform()), 1.0 / p.shape);
}

struct FitOptions {
  double tolerance = 1e-8;  // shape-equation residual / relative log-likelihood change
  int max_iterations = 500;
  int restarts = 5;
  std::optional<double> fixed_shape;  // fit the scale only
  std::uint64_t seed = 0x5EEDULL;     // restart initializations

  void validate() const {
    if (!(tolerance > 0.0)) throw ConfigError("fit: tolerance must be > 0");
    if (max_iterations < 1) throw ConfigError("fit: max_iterations must be >= 1");
    if (restarts < 1) throw ConfigError("fit: restarts must be >= 1");
    if (fixed_shape && !(*fixed_shape > 0.0)) throw ConfigError("fit: fixed shape must be > 0");
  }
};

inline constexpr double kMinShape = 1e-3;
inline constexpr double kMaxShape = 1e3;

namespace detail {

// Weighted profile-likelihood shape equation
//   sum w x^k ln x / sum w x^k - 1/k - sum w ln x / sum w = 0,
// evaluated on logs shifted by their maximum so x^k never overflows.
class ShapeEquation {
 public:
  ShapeEquation(std::span<const double> log_x, std::span<const double> weights)
      : log_x_(log_x), weights_(weights) {
    shift_ = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < log_x.size(); ++i)
      if (weight(i) > 0.0) shift_ = std::max(shift_, log_x[i]);
    double sw = 0.0, swy = 0.0;
    for (std::size_t i = 0; i < log_x.size(); ++i) {
      sw += weight(i);
      swy += weight(i) * (log_x[i] - shift_);
    }
    total_weight_ = sw;
    mean_y_ = swy / sw;
  }

  struct Eval {
    double residual;
    double slope;
    double log_mean_power;  // ln(sum w e^{k y} / sum w)
  };

  Eval operator()(double k) const {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < log_x_.size(); ++i) {
      const double w = weight(i);
      if (w == 0.0) continue;
      const double y = log_x_[i] - shift_;
      const double e = w * std::exp(k * y);
      s0 += e;
      s1 += e * y;
      s2 += e * y * y;
    }
    const double m1 = s1 / s0;
    const double var = std::max(0.0, s2 / s0 - m1 * m1);
    return {m1 - 1.0 / k - mean_y_, var + 1.0 / (k * k), std::log(s0 / total_weight_)};
  }

  double scale_for(double k, double log_mean_power) const {
    return std::exp(shift_ + log_mean_power / k);
  }

 private:
  double weight(std::size_t i) const { return weights_.empty() ? 1.0 : weights_[i]; }

  std::span<const double> log_x_;
  std::span<const double> weights_;
  double shift_ = 0.0;
  double total_weight_ = 0.0;
  double mean_y_ = 0.0;
};

struct ShapeSolution {
  WeibullParams params;
  double residual = 0.0;
};

// Safeguarded Newton on the monotone shape equation, bracketed on
// [kMinShape, kMaxShape]; falls back to bisection whenever Newton leaves the
// bracket. Roots outside the bracket are clamped to its ends.
inline ShapeSolution solve_shape(std::span<const double> log_x, std::span<const double> weights,
                                 double tolerance, double initial_shape,
                                 std::optional<double> fixed_shape) {
  const ShapeEquation eq(log_x, weights);
  if (fixed_shape) {
    const auto e = eq(*fixed_shape);
    return {{*fixed_shape, eq.scale_for(*fixed_shape, e.log_mean_power)}, 0.0};
  }

  double lo = kMinShape, hi = kMaxShape;
  auto e_lo = eq(lo);
  if (e_lo.residual >= 0.0) return {{lo, eq.scale_for(lo, e_lo.log_mean_power)}, e_lo.residual};
  auto e_hi = eq(hi);
  if (e_hi.residual <= 0.0) return {{hi, eq.scale_for(hi, e_hi.log_mean_power)}, e_hi.residual};

  double k = std::clamp(initial_shape, lo * 2.0, hi / 2.0);
  auto e = eq(k);
  for (int iter = 0; iter < 200 && std::abs(e.residual) >= tolerance; ++iter) {
    if (e.residual < 0.0)
      lo = k;
    else
      hi = k;
    double next = k - e.residual / e.slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - k) <= 4.0 * std::numeric_limits<double>::epsilon() * k) {
      k = next;
      e = eq(k);
      break;
    }
    k = next;
    e = eq(k);
  }
  return {{k, eq.scale_for(k, e.log_mean_power)}, e.residual};
}

inline std::vector<double> checked_logs(std::span<const double> samples) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (double x : samples) {
    if (!(x > 0.0) || !std::isfinite(x))
      throw DomainError("weibull fit: samples must be finite and > 0");
    out.push_back(std::log(x));
  }
  return out;
}

// Neumaier-compensated accumulator.
class Sum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace detail

/// Residual of the (unweighted) shape equation at `shape`.
inline double shape_equation_residual(std::span<const double> samples, double shape) {
  const auto logs = detail::checked_logs(samples);
  return detail::ShapeEquation(logs, {})(shape).residual;
}

/// Maximum-likelihood Weibull fit.
inline WeibullParams fit_mle(std::span<const double> samples, const FitOptions& opts = {}) {
  opts.validate();
  if (samples.size() < 10) throw DomainError("fit_mle: need at least 10 samples");
  const auto logs = detail::checked_logs(samples);
  if (std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples[0]; }))
    throw DegenerateDataError("fit_mle: all samples are equal; shape diverges");
  return detail::solve_shape(logs, {}, opts.tolerance, 1.0, opts.fixed_shape).params;
}

struct MixtureComponent {
  double weight = 1.0;
  WeibullParams params;
  bool operator==(const MixtureComponent&) const = default;
};

struct MixtureModel {
  std::vector<MixtureComponent> components;

  void validate() const {
    if (components.empty()) throw DomainError("mixture: needs at least one component");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw DomainError("mixture: weight out of [0, 1]");
      c.params.validate();
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw DomainError("mixture: weights must sum to 1");
  }

  double pdf(double x) const {
    double d = 0.0;
    for (const auto& c : components) d += c.weight * weibull::pdf(x, c.params);
    return d;
  }

  double cdf(double x) const {
    double f = 0.0;
    for (const auto& c : components) f += c.weight * weibull::cdf(x, c.params);
    return std::min(1.0, f);
  }

  double sample(RngStream& rng) const {
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& c : components) {
      acc += c.weight;
      if (u < acc) return weibull::sample(c.params, rng);
    }
    return weibull::sample(components.back().params, rng);
  }
};

inline double log_likelihood(std::span<const double> samples, const MixtureModel& model) {
  detail::Sum total;
  std::vector<double> terms(model.components.size());
  for (double x : samples) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const auto& c = model.components[j];
      terms[j] = c.weight > 0.0 ? std::log(c.weight) + log_pdf(x, c.params)
                                : -std::numeric_limits<double>::infinity();
      peak = std::max(peak, terms[j]);
    }
    if (!std::isfinite(peak))
      throw NumericError("log_likelihood: sample " + std::to_string(x) +
                         " has zero or unbounded density");
    double s = 0.0;
    for (double t : terms) s += std::exp(t - peak);
    total.add(peak + std::log(s));
  }
  return total.value();
}

/// Kolmogorov-Smirnov distance between the sample's empirical CDF and `cdf`.
template <typename Cdf>
double ks_statistic(std::span<const double> samples, Cdf&& cdf) {
  if (samples.empty()) throw DomainError("ks_statistic: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return std::clamp(d, 0.0, 1.0);
}

inline double ks_statistic(std::span<const double> samples, const MixtureModel& model) {
  return ks_statistic(samples, [&](double x) { return model.cdf(x); });
}

struct MixtureFit {
  MixtureModel model;
  double log_likelihood = 0.0;
  std::vector<double> trace;  // log-likelihood per iteration of the chosen restart
  int iterations = 0;
  bool converged = false;
  int restart = 0;
};

/// Finite Weibull mixture fitted by expectation-maximization.
///
/// Each restart seeds component scales at sample quantiles (evenly spaced for
/// the first restart, random for the rest) with unit shapes and equal weights.
/// The E-step computes responsibilities in log space; the M-step sets weights
/// to mean responsibilities and refits each component by weighted MLE. The
/// restart with the highest final log-likelihood wins; components are
/// returned in ascending scale order.
inline MixtureFit fit_mixture(std::span<const double> samples, int n_modes,
                              const FitOptions& opts = {}) {
  opts.validate();
  if (n_modes < 1) throw ConfigError("fit_mixture: n_modes must be >= 1");
  const auto n = samples.size();
  if (n < 10 * static_cast<std::size_t>(n_modes))
    throw ConfigError("fit_mixture: " + std::to_string(n_modes) + " modes need at least " +
                      std::to_string(10 * n_modes) + " samples, got " + std::to_string(n));
  const auto logs = detail::checked_logs(samples);
  if (std::all_of(samples.begin(), samples.end(), [&](double x) { return x == samples[0]; }))
    throw DegenerateDataError("fit_mixture: all samples are equal");

  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * static_cast<double>(n - 1));
    return sorted[std::min(idx, n - 1)];
  };

  const auto m = static_cast<std::size_t>(n_modes);
  const double inner_tol = std::min(opts.tolerance, 1e-11);

  std::optional<MixtureFit> best;
  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::vector<double> qs(m);
    if (restart == 0) {
      for (std::size_t j = 0; j < m; ++j) qs[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
    } else {
      RngStream rng(opts.seed, static_cast<std::uint64_t>(restart));
      for (double& q : qs) q = 0.02 + 0.96 * rng.uniform();
      std::sort(qs.begin(), qs.end());
    }
    MixtureFit fit;
    fit.restart = restart;
    for (double q : qs)
      fit.model.components.push_back({1.0 / static_cast<double>(m), {1.0, quantile(q)}});

    std::vector<double> resp(n * m);  // column-major: component j at [j*n, (j+1)*n)
    std::vector<double> terms(m);
    double previous = 0.0;
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
      // E-step
      detail::Sum ll;
      for (std::size_t i = 0; i < n; ++i) {
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
          const auto& c = fit.model.components[j];
          terms[j] = c.weight > 0.0 ? std::log(c.weight) + log_pdf(samples[i], c.params)
                                    : -std::numeric_limits<double>::infinity();
          peak = std::max(peak, terms[j]);
        }
        if (!std::isfinite(peak)) throw NumericError("fit_mixture: sample with zero density");
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += (terms[j] = std::exp(terms[j] - peak));
        for (std::size_t j = 0; j < m; ++j) resp[j * n + i] = terms[j] / s;
        ll.add(peak + std::log(s));
      }
      fit.log_likelihood = ll.value();
      fit.trace.push_back(fit.log_likelihood);
      fit.iterations = iter + 1;
      if (iter > 0 &&
          std::abs(fit.log_likelihood - previous) <= opts.tolerance * std::abs(previous)) {
        fit.converged = true;
        break;
      }
      previous = fit.log_likelihood;
      if (iter + 1 == opts.max_iterations) break;

      // M-step
      std::vector<double> mass(m, 0.0);
      double total_mass = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        detail::Sum s;
        for (std::size_t i = 0; i < n; ++i) s.add(resp[j * n + i]);
        mass[j] = s.value();
        total_mass += mass[j];
      }
      for (std::size_t j = 0; j < m; ++j) {
        auto& c = fit.model.components[j];
        c.weight = mass[j] / total_mass;
        // A collapsed component keeps its parameters; the step stays an ascent.
        if (mass[j] <= 1e-9 * static_cast<double>(n)) continue;
        const std::span<const double> w(resp.data() + j * n, n);
        c.params =
            detail::solve_shape(logs, w, inner_tol, c.params.shape, opts.fixed_shape).params;
      }
    }

    if (!best || fit.log_likelihood > best->log_likelihood) best = std::move(fit);
  }

  std::sort(best->model.components.begin(), best->model.components.end(),
            [](const auto& a, const auto& b) { return a.params.scale < b.params.scale; });
  return std::move(*best);
}

}  // namespace gridsim::weibull
