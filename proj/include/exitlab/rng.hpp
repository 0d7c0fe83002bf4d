#pragma once

#include <cmath>
#include <cstdint>

namespace exitlab::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// A stream is identified by (seed, stream_a, stream_b); draws within a
// stream advance a 64-bit block counter. Streams with distinct ids are
// statistically independent, which makes batch simulation reproducible
// regardless of scheduling: path i always sees the same numbers.
class Stream {
 public:
  Stream(std::uint64_t seed, std::uint32_t stream_a, std::uint32_t stream_b)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        ctr2_(stream_a),
        ctr3_(stream_b) {}

  std::uint32_t next_u32() {
    if (buf_pos_ == 4) refill();
    return buf_[buf_pos_++];
  }

  // Uniform on (0,1): 53 random bits, offset by half an ulp so 0 is excluded.
  double uniform() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    const std::uint64_t bits = (hi << 32 | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Unbiased integer on [0, n) by rejection on the top of the 64-bit range.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
    for (;;) {
      const std::uint64_t lo = next_u32();
      const std::uint64_t hi = next_u32();
      const std::uint64_t v = hi << 32 | lo;
      if (v < limit) return v % n;
    }
  }

 private:
  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                      std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
  }

  void refill() {
    std::uint32_t c0 = static_cast<std::uint32_t>(block_);
    std::uint32_t c1 = static_cast<std::uint32_t>(block_ >> 32);
    std::uint32_t c2 = ctr2_, c3 = ctr3_;
    std::uint32_t k0 = key0_, k1 = key1_;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(0xD2511F53u, c0, hi0, lo0);
      mulhilo(0xCD9E8D57u, c2, hi1, lo1);
      const std::uint32_t n0 = hi1 ^ c1 ^ k0;
      const std::uint32_t n1 = lo1;
      const std::uint32_t n2 = hi0 ^ c3 ^ k1;
      const std::uint32_t n3 = lo0;
      c0 = n0;
      c1 = n1;
      c2 = n2;
      c3 = n3;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    buf_[0] = c0;
    buf_[1] = c1;
    buf_[2] = c2;
    buf_[3] = c3;
    buf_pos_ = 0;
    ++block_;
  }

  std::uint32_t key0_, key1_;
  std::uint32_t ctr2_, ctr3_;
  std::uint64_t block_ = 0;
  std::uint32_t buf_[4]{};
  int buf_pos_ = 4;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Stream id conventions used across the library. Keeping them in one place
// guarantees that estimators which must share randomness (e.g. degenerate
// splitting vs direct Monte Carlo) actually do.
inline Stream path_stream(std::uint64_t seed, std::uint32_t path_index) {
  return Stream(seed, path_index, 0);
}
inline Stream level_stream(std::uint64_t seed, std::uint32_t slot,
                           std::uint32_t level) {
  return Stream(seed, slot, level);
}
inline Stream resample_stream(std::uint64_t seed, std::uint32_t level) {
  return Stream(seed, 0xFFFFFFFFu, level);
}

}  // namespace exitlab::rng
