#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mananet {

/// xoshiro256++ generator. Self-contained so that every draw is reproducible
/// bit-for-bit across platforms and standard libraries; std:: distributions
/// carry no such guarantee.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  /// Independent deterministic stream derived from (seed, stream_id).
  /// Lets per-day / per-tensor work be generated out of order or in parallel
  /// without changing the result.
  static Rng stream(uint64_t seed, uint64_t stream_id);

  uint64_t next_u64();

  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi);
  /// Standard normal via the polar method.
  double normal();
  /// Gamma(alpha, 1), alpha > 0. Marsaglia-Tsang.
  double gamma(double alpha);

  /// Fisher-Yates shuffle.
  void shuffle(std::vector<int>& v);

 private:
  uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer, used for stream derivation and stable string hashes.
uint64_t splitmix64(uint64_t x);

/// FNV-1a. Stable across platforms; used to key per-name RNG streams.
uint64_t stable_hash(std::string_view s);

}  // namespace mananet
