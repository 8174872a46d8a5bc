#pragma once

// Counter-based RNG (Philox-4x32-10). Streams are keyed by (seed, stream),
// so a worker pool can hand out walk indices in any order and still produce
// bit-identical results.

#include <cmath>
#include <cstdint>

namespace rangeld {

class Philox {
 public:
  Philox(std::uint64_t seed, std::uint64_t stream) {
    key_[0] = static_cast<std::uint32_t>(seed);
    key_[1] = static_cast<std::uint32_t>(seed >> 32);
    ctr_[2] = static_cast<std::uint32_t>(stream);
    ctr_[3] = static_cast<std::uint32_t>(stream >> 32);
  }

  std::uint32_t next_u32() {
    if (have_ == 0) {
      fill();
      have_ = 4;
    }
    return out_[--have_];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform double in [0, 1).
  double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform integer in [0, n). n must be >= 1.
  std::uint32_t next_below(std::uint32_t n) {
    const std::uint32_t lim = UINT32_MAX - UINT32_MAX % n;
    std::uint32_t v;
    do {
      v = next_u32();
    } while (v >= lim);
    return v % n;
  }

  double next_gaussian() {
    if (have_gauss_) {
      have_gauss_ = false;
      return gauss_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    gauss_ = v * m;
    have_gauss_ = true;
    return u * m;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  void fill() {
    std::uint32_t c0 = ctr_[0], c1 = ctr_[1], c2 = ctr_[2], c3 = ctr_[3];
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * c0;
      const std::uint64_t p1 = std::uint64_t(kMul1) * c2;
      const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0; c1 = n1; c2 = n2; c3 = n3;
      k0 += kW0;
      k1 += kW1;
    }
    out_[0] = c0; out_[1] = c1; out_[2] = c2; out_[3] = c3;
    if (++ctr_[0] == 0 && ++ctr_[1] == 0) ++ctr_[2];
  }

  std::uint32_t key_[2] = {0, 0};
  std::uint32_t ctr_[4] = {0, 0, 0, 0};
  std::uint32_t out_[4] = {0, 0, 0, 0};
  int have_ = 0;
  bool have_gauss_ = false;
  double gauss_ = 0.0;
};

}  // namespace rangeld
