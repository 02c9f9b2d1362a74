#pragma once

#include <cstdint>
#include <limits>

namespace gazecode {

/**
 * @brief SplitMix64 generator with explicit stream derivation.
 *
 * Every random quantity in the library is drawn from a generator whose seed
 * is derived from a session (or campaign) master seed and a stream index.
 * Results therefore depend only on (master seed, stream index), never on
 * evaluation order or thread assignment.
 */
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  constexpr explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    return mix(z);
  }

  /// Uniform integer in [0, bound). Lemire's multiply-and-reject, unbiased.
  constexpr std::uint32_t below(std::uint32_t bound) noexcept {
    std::uint64_t x = (*this)() >> 32;
    std::uint64_t m = x * bound;
    auto low = static_cast<std::uint32_t>(m);
    if (low < bound) {
      const std::uint32_t threshold = static_cast<std::uint32_t>(-bound) % bound;
      while (low < threshold) {
        x = (*this)() >> 32;
        m = x * bound;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  constexpr bool bernoulli(double p) noexcept { return uniform() < p; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

/// Seed of sub-stream `stream` of `master`. Two rounds of mixing keep
/// neighbouring (master, stream) pairs decorrelated.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept {
  const std::uint64_t a = SplitMix64::mix(master + 0x9E3779B97F4A7C15ULL);
  return SplitMix64::mix(a ^ SplitMix64::mix(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
}

// Named sub-streams used inside one trial.
namespace stream {
inline constexpr std::uint64_t code = 1;
inline constexpr std::uint64_t orientation = 2;
inline constexpr std::uint64_t placement = 3;
inline constexpr std::uint64_t model = 4;
inline constexpr std::uint64_t behaviour = 5;
inline constexpr std::uint64_t plan = 6;
} // namespace stream

} // namespace gazecode
