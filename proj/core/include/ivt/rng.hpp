#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace ivt {

// splitmix64 finalizer; used to derive independent sub-seeds from a run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator with platform-stable distributions.
///
/// std::uniform_real_distribution and friends are implementation-defined, so
/// the transforms from raw mt19937_64 output are done here. Two builds with
/// different standard libraries produce the same streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second deviate.
  double normal();

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::size_t below(std::size_t n);

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ivt
