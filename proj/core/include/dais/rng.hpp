#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include "dais/types.hpp"

namespace dais {

/// Counter-based, splittable generator.
///
/// Each stream is identified by a 64-bit key; the i-th output is a pure
/// function of (key, i), so streams can be split off deterministically and
/// handed to independent workers without coordination. The mixing function
/// is the SplitMix64 finalizer.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return mix(key_ + kGolden * ++counter_); }

  /// Child stream `index`. Children of the same parent are distinct streams
  /// and do not advance the parent.
  Rng split(std::uint64_t index) const;

  double uniform();
  double normal() { return normal_(*this); }
  Vector normal_vector(Index d);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace dais
