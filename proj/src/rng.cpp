#include "gts/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "gts/tensor.hpp"

namespace gts {

uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

uint64_t fnv1a64(const void* bytes, size_t len) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

static inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

Rng::Rng(uint64_t seed) : seed_(seed) {
  uint64_t sm = seed;
  for (auto& w : s_) w = splitmix64(sm);
}

uint64_t Rng::next_u64() {
  const uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t Rng::uniform_int(int64_t n) {
  if (n <= 0) throw Error("uniform_int: n must be positive");
  return static_cast<int64_t>((static_cast<__uint128_t>(next_u64()) *
                               static_cast<__uint128_t>(n)) >> 64);
}

double Rng::normal() {
  double u1 = 1.0 - uniform();  // (0, 1]
  double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gumbel() {
  double u = uniform();
  if (u < 1e-10) u = 1e-10;
  if (u > 1.0 - 1e-10) u = 1.0 - 1e-10;
  return -std::log(-std::log(u));
}

Rng Rng::split(const std::string& label) const {
  return Rng(seed_ ^ fnv1a64(label));
}

Rng Rng::split(const std::string& label, uint64_t index) const {
  uint64_t h = fnv1a64(label) ^ (0x9e3779b97f4a7c15ull * (index + 1));
  return Rng(seed_ ^ h);
}

std::string Rng::state_string() const {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%016llx:%016llx:%016llx:%016llx:%016llx",
                (unsigned long long)seed_, (unsigned long long)s_[0],
                (unsigned long long)s_[1], (unsigned long long)s_[2],
                (unsigned long long)s_[3]);
  return buf;
}

Rng Rng::from_state_string(const std::string& s) {
  Rng r;
  unsigned long long v[5];
  if (std::sscanf(s.c_str(), "%llx:%llx:%llx:%llx:%llx", &v[0], &v[1], &v[2],
                  &v[3], &v[4]) != 5)
    throw Error("malformed rng state string: " + s);
  r.seed_ = v[0];
  for (int i = 0; i < 4; ++i) r.s_[i] = v[i + 1];
  return r;
}

}  // namespace gts
