#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace lockloss {

// Philox4x32-10 counter-based generator.
//   Salmon et al., "Parallel random numbers: as easy as 1, 2, 3", SC'11.
namespace philox {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

constexpr Counter round(const Counter& c, const Key& k) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

constexpr Counter block(Counter c, Key k) {
  for (int r = 0; r < 10; ++r) {
    c = round(c, k);
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  return c;
}

}  // namespace philox

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Identifies one reproducible sequence of random draws.
struct NoiseStream {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  /// Derived stream for a sub-task. Distinct k give (statistically) disjoint ids.
  constexpr NoiseStream substream(std::uint64_t k) const {
    return {master_seed, splitmix64(stream_id ^ splitmix64(k + 0x6A09E667F3BCC909ull))};
  }

  constexpr bool operator==(const NoiseStream&) const = default;
};

/// Sequential uniform/normal draws from a NoiseStream. The n-th draw depends
/// only on (master_seed, stream_id, n).
class GaussianSource {
 public:
  explicit GaussianSource(NoiseStream s) : stream_(s) {}

  /// Uniform on (0, 1].
  double uniform() {
    if (pos_ == 4) refill();
    const std::uint32_t hi = buf_[pos_++];
    if (pos_ == 4) refill();
    const std::uint32_t lo = buf_[pos_++];
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal by Box-Muller; draws come in pairs.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  NoiseStream stream() const { return stream_; }

 private:
  void refill() {
    const philox::Counter c{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                            static_cast<std::uint32_t>(stream_.stream_id),
                            static_cast<std::uint32_t>(stream_.stream_id >> 32)};
    const philox::Key k{static_cast<std::uint32_t>(stream_.master_seed),
                        static_cast<std::uint32_t>(stream_.master_seed >> 32)};
    buf_ = philox::block(c, k);
    ++block_;
    pos_ = 0;
  }

  NoiseStream stream_;
  std::uint64_t block_ = 0;
  philox::Counter buf_{};
  int pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lockloss
