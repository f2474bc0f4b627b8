#pragma once

#include <cstdint>
#include <initializer_list>

namespace csma {

// Deterministic counter-based randomness.
//
// Every random draw in the project comes from a SplitMix64 stream whose key is
// derived from (seed, purpose, slot, node, ...). The generator is a pure
// integer permutation, so integer draws are bit-exact on any platform, and a
// stream can be reconstructed at any point from its key alone. Distinct
// purposes give independent streams: arrival randomness never perturbs
// service randomness, and dropping one consumer leaves the others unchanged.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

constexpr std::uint64_t combine_key(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ (mix64(v) + kGolden + (h << 6) + (h >> 2)));
}

constexpr std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x8f1bbcdcbfa53e0bULL;
  for (std::uint64_t p : parts) h = combine_key(h, p);
  return h;
}

// Stream purposes. Values are part of the trace format: changing them changes
// every seeded run.
enum class Stream : std::uint64_t {
  service = 1,
  arrival = 2,
  routing = 3,
  experiment = 4,
  graph_gen = 5,
  search = 6,
  scan = 7,
  descent = 8,
  sweep_row = 9,
  fairness = 10,
};

class RngStream {
 public:
  explicit constexpr RngStream(std::uint64_t key) noexcept : state_(key) {}

  constexpr std::uint64_t next_u64() noexcept {
    state_ += kGolden;
    return mix64(state_);
  }

  // Uniform in [0,1), 53 random bits.
  double next_double() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0,1); rejects exact zero so logs and powers stay finite.
  double next_open() noexcept {
    double u;
    do {
      u = next_double();
    } while (u == 0.0);
    return u;
  }

  // Unbiased integer in [0, n), n >= 1.
  std::uint64_t next_below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

 private:
  std::uint64_t state_;
};

inline RngStream substream(std::uint64_t seed, Stream purpose, std::uint64_t a = 0,
                           std::uint64_t b = 0, std::uint64_t c = 0) {
  return RngStream(derive_key({seed, static_cast<std::uint64_t>(purpose), a, b, c}));
}

// Poisson draw by Knuth's product method. exp(-rate) is passed in so repeated
// draws share one transcendental evaluation.
inline std::int64_t poisson_draw(RngStream& s, double exp_neg_rate) {
  std::int64_t k = 0;
  double p = 1.0;
  for (;;) {
    p *= s.next_double();
    if (p <= exp_neg_rate) return k;
    ++k;
  }
}

}  // namespace csma
