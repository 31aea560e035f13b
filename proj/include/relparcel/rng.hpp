#ifndef RELPARCEL_RNG_HPP
#define RELPARCEL_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace relparcel {

/// Seeded random stream. Draws are computed from raw 64-bit engine output so
/// the sequence does not depend on the standard library's distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from a master seed and a stream name.
  static Rng substream(std::uint64_t master, std::string_view name);
  static Rng substream(std::uint64_t master, std::string_view name, std::uint64_t index);

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi].
  std::int64_t integer(std::int64_t lo, std::int64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t master, std::string_view name, std::uint64_t index = 0);

}  // namespace relparcel

#endif  // RELPARCEL_RNG_HPP
