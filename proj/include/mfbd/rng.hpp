#pragma once

#include <cstdint>
#include <random>

namespace mfbd {

/// Independent stream tags, so the same (replicate, level) pair used by two
/// different experiments never shares random numbers.
enum class StreamPurpose : std::uint32_t {
  kCascade = 1,
  kMotherCovariance = 2,
  kIncrementMoment = 3,
  kVariance = 4,
  kGeneric = 5,
};

/// Seeded deterministic random stream.
///
/// Substreams are derived from (root seed, purpose, replicate, level) through
/// std::seed_seq, so every replicate can be generated in isolation and the
/// result does not depend on which worker runs it or in which order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  static Rng substream(std::uint64_t root, StreamPurpose purpose,
                       std::uint64_t replicate, std::uint64_t level = 0);

  /// Uniform on [0, 1).
  double uniform();
  /// Exponential with the given rate (> 0).
  double exponential(double rate);

  std::mt19937_64& engine() { return engine_; }

 private:
  explicit Rng(std::seed_seq& seq) : engine_(seq) {}
  std::mt19937_64 engine_;
};

}  // namespace mfbd
