#ifndef DDGAN_RNG_HPP_
#define DDGAN_RNG_HPP_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ddgan {

/// Deterministic xoshiro256** generator seeded through SplitMix64.
///
/// Draw sequences depend only on the 64-bit seed, never on global state.
/// `split(stream)` derives an independent child generator from the seed
/// (not from the current state), so per-sample streams such as
/// `split(index)` are stable regardless of how many draws happened before.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  Rng split(std::uint64_t stream) const;

  /// Fisher-Yates shuffle driven by this generator.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

/// 0, 1, ..., n-1 in random order.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace ddgan

#endif  // DDGAN_RNG_HPP_
