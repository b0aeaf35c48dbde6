#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace fedpredi {

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Order-sensitive combination of seed components.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

// FNV-1a, used to turn tags and example ids into seed components.
std::uint64_t hash_string(std::string_view s);

/// Seeded random source with samplers defined in this library rather than by
/// the standard library's distributions, whose output is implementation
/// specific. Identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double uniform();

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  // Standard normal (Box-Muller, one value per call).
  double normal();

  // Gamma(shape, 1), Marsaglia-Tsang with the shape < 1 boost.
  double gamma(double shape);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedpredi
