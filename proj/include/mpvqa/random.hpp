// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random streams. A stream is a 64-bit key plus a counter, so
// the value drawn at position n never depends on other streams or on the
// order in which work units run.
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <vector>

namespace mpvqa {

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Key for a named stream: FNV-1a over the seed and each part, with a
/// separator byte so ("ab","c") and ("a","bc") differ.
std::uint64_t stream_key(std::uint64_t seed, std::initializer_list<std::string_view> parts);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}
  CounterRng(std::uint64_t seed, std::initializer_list<std::string_view> parts)
      : key_(stream_key(seed, parts)) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n) by rejection; n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal (Box-Muller, one value per call).
  double normal();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle of `items` driven by `rng`.
template <class T>
void shuffle(std::vector<T>& items, CounterRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace mpvqa
