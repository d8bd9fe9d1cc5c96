#pragma once

#include <cmath>
#include <cstdint>

namespace rdm {

// Counter-based deterministic generator. Every output is a stateless hash of
// (key, counter), so derived streams for parallel work can never reorder each
// other's draws. Two rounds of the SplitMix64 finalizer give the avalanche.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed) : key_(mix64(seed ^ kSeedSalt)) {}

  // Independent stream; tag is any caller-chosen stream id.
  RandomSource derive(uint64_t tag) const {
    RandomSource r(*this);
    r.key_ = mix64(key_ ^ mix64(tag ^ kDeriveSalt));
    r.counter_ = 0;
    r.has_spare_ = false;
    return r;
  }

  uint64_t next_u64() { return mix64(key_ ^ mix64(kGolden * ++counter_)); }

  // Uniform in the open interval (0, 1).
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; pairs are cached.
  double next_normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    double u2 = next_uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;
  static constexpr uint64_t kSeedSalt = 0x243f6a8885a308d3ull;
  static constexpr uint64_t kDeriveSalt = 0x13198a2e03707344ull;

  static uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  uint64_t key_;
  uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace rdm
