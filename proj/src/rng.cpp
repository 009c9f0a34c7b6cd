#include "mfbd/rng.hpp"

#include <cmath>

namespace mfbd {

namespace {
std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::seed_seq seq{lo(seed), hi(seed)};
  engine_.seed(seq);
}

Rng Rng::substream(std::uint64_t root, StreamPurpose purpose,
                   std::uint64_t replicate, std::uint64_t level) {
  std::seed_seq seq{lo(root),      hi(root),       static_cast<std::uint32_t>(purpose),
                    lo(replicate), hi(replicate), lo(level),
                    hi(level)};
  return Rng(seq);
}

double Rng::uniform() {
  // libstdc++ can round generate_canonical up to exactly 1.
  const double u = std::generate_canonical<double, 53>(engine_);
  return u < 1.0 ? u : std::nextafter(1.0, 0.0);
}

double Rng::exponential(double rate) { return -std::log1p(-uniform()) / rate; }

}  // namespace mfbd
