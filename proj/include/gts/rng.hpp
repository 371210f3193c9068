#pragma once

#include <cstdint>
#include <string>

namespace gts {

// Deterministic xoshiro256** generator with splitmix64 seeding.
// All stochastic code in the project draws from this class so that runs
// are reproducible from a single integer seed across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();
  // Uniform in [0, 1) with 53-bit resolution.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). n must be positive.
  int64_t uniform_int(int64_t n);
  // Standard normal via Box-Muller (one value per call, two uniforms consumed).
  double normal();
  // Standard Gumbel: -log(-log(u)), u clamped to [1e-10, 1 - 1e-10].
  double gumbel();

  // Independent child stream derived from this stream's seed and a label.
  // Does not advance this stream.
  Rng split(const std::string& label) const;
  Rng split(const std::string& label, uint64_t index) const;

  // Full state round-trip, used by checkpoints.
  std::string state_string() const;
  static Rng from_state_string(const std::string& s);

  uint64_t seed() const { return seed_; }

 private:
  Rng() = default;
  uint64_t seed_ = 0;
  uint64_t s_[4] = {0, 0, 0, 0};
};

uint64_t splitmix64(uint64_t& state);
uint64_t fnv1a64(const void* bytes, size_t len);
uint64_t fnv1a64(const std::string& s);

}  // namespace gts
