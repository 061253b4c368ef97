#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace opcnn {

/// xoshiro256** seeded through splitmix64.
///
/// Every random draw in the library goes through this generator so that runs
/// are reproducible from a single integer seed on any platform. The standard
/// <random> distributions are not used because their output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::uint64_t splitmix64(std::uint64_t& state);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Derives an independent per-purpose seed from a root seed and a label such
/// as "init", "shuffle", "dropout" or "data".
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

}  // namespace opcnn
