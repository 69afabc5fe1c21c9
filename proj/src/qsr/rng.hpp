#pragma once

// Counter-based random streams for reproducible parallel Monte Carlo.
// A stream is addressed by (master_seed, path_index, stream_id); the same
// address always yields the same sequence, independent of which thread
// generates it or in what order paths complete.

#include <cstdint>
#include <cmath>
#include <numbers>

namespace qsr::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master_seed,
                                 std::uint64_t path_index,
                                 std::uint64_t stream_id) noexcept {
  std::uint64_t s = master_seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (path_index + 0x9e3779b97f4a7c15ull);
  h = splitmix64(s);
  s = h ^ (stream_id + 0xd1b54a32d192ed03ull);
  return splitmix64(s);
}

// xoshiro256++ with Box-Muller normals. All arithmetic is spelled out so a
// sequence depends only on the seed, not on library internals.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) noexcept {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double next_unit() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // uniform in (0, 1], safe as a log argument
  double next_unit_positive() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  double next_normal() noexcept {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u = next_unit_positive();
    const double v = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u));
    const double angle = 2.0 * std::numbers::pi * v;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline constexpr std::uint64_t kNoiseStream = 0;
inline constexpr std::uint64_t kTerminalStream = 1;
inline constexpr std::uint64_t kProbeStream = 2;

inline Stream make_stream(std::uint64_t master_seed, std::uint64_t path_index,
                          std::uint64_t stream_id) noexcept {
  return Stream(derive_seed(master_seed, path_index, stream_id));
}

}  // namespace qsr::rng
