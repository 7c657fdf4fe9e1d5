#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace ufg {

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** with explicit state so runs are reproducible across
// platforms and standard-library versions (std:: distributions are not).
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // inclusive bounds
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Derives an independent deterministic stream; does not disturb this one.
  Rng fork(uint64_t stream_id) const {
    uint64_t mix = state_[0] ^ (stream_id * 0x9e3779b97f4a7c15ULL) ^ state_[3];
    return Rng(mix);
  }

  std::array<uint64_t, 6> save_state() const {
    return {state_[0], state_[1], state_[2], state_[3],
            has_spare_ ? 1ULL : 0ULL, bit_cast_u64(spare_)};
  }

  void restore_state(const std::array<uint64_t, 6>& s) {
    for (int i = 0; i < 4; ++i) state_[i] = s[i];
    has_spare_ = s[4] != 0;
    spare_ = bit_cast_double(s[5]);
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  static uint64_t bit_cast_u64(double d) {
    uint64_t u;
    __builtin_memcpy(&u, &d, 8);
    return u;
  }
  static double bit_cast_double(uint64_t u) {
    double d;
    __builtin_memcpy(&d, &u, 8);
    return d;
  }

  uint64_t state_[4] = {};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ufg
