#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace fsml {

/// 64-bit FNV-1a over the raw bytes of `s`.
std::uint64_t hash64(std::string_view s) noexcept;

/// SplitMix64 stream. Every random draw in the library goes through here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next_u64() noexcept;

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() noexcept;

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Sum of 12 uniforms minus 6.
  double approx_normal() noexcept;

  template <typename T>
  void shuffle(std::vector<T>& v) noexcept {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  /// Independent child stream, e.g. one per domain or per seed.
  Rng fork(std::uint64_t salt) noexcept;

 private:
  std::uint64_t state_;
};

}  // namespace fsml
