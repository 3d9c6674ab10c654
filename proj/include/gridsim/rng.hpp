#pragma once

#include <cmath>
#include <cstdint>

namespace gridsim {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream. The draw sequence is a pure function of
/// (seed, stream_id), so results do not depend on the order in which streams
/// are consumed and are bit-identical across platforms.
class RngStream {
 public:
  constexpr RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : key_(detail::mix64(detail::mix64(seed ^ 0x5851F42D4C957F2DULL) ^
                           (stream_id * detail::kGolden))) {}

  /// Stream for one attempt of one job. Injective for attempt_index < 128,
  /// which the retry sanity bound guarantees.
  static constexpr RngStream for_attempt(std::uint64_t seed, std::uint64_t job_id,
                                         std::uint32_t attempt_index) noexcept {
    return RngStream(seed, (job_id << 7) | (attempt_index & 0x7FU));
  }

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  constexpr double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Number of successes in `trials` Bernoulli(p) trials. Exact, via
  /// geometric skipping; cost is proportional to the number of successes.
  std::uint64_t binomial(std::uint64_t trials, double p) noexcept {
    if (trials == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    const double log_q = std::log1p(-p);
    std::uint64_t hits = 0;
    double position = 0.0;
    const auto limit = static_cast<double>(trials);
    while (true) {
      position += std::floor(std::log(uniform()) / log_q) + 1.0;
      if (position > limit) break;
      ++hits;
    }
    return hits;
  }

  constexpr std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace gridsim
