#pragma once

#include <cstdint>
#include <random>

namespace kuq {

// Role of a stream within a run. Distinct purposes give statistically
// independent streams even at equal (replication, sample) indices.
enum class StreamPurpose : std::uint32_t {
  NodeDraw = 1,         // z_k sampling for the primary estimator
  InitialSampling = 2,  // particle draws from f_0
  Pairing = 3,          // pair-selection permutations
  Noise = 4,            // eta draws
  ControlNodes = 5,     // fresh nodes for the MFCV control mean
  Reference = 6,        // reference solution runs
  Synthetic = 7,        // test-only synthetic data
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t x = state;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stream identity: master seed plus (replication, sample, purpose) key.
// Identical specs reproduce identical draws; distinct keys decorrelate.
struct RngStreamSpec {
  std::uint64_t master{0};
  std::uint32_t replication{0};
  std::uint32_t sample{0};
  StreamPurpose purpose{StreamPurpose::Synthetic};
};

class RngStream {
 public:
  RngStream() : RngStream(RngStreamSpec{}) {}

  explicit RngStream(const RngStreamSpec& spec) {
    std::uint64_t s = spec.master;
    s ^= 0x243f6a8885a308d3ull * (static_cast<std::uint64_t>(spec.replication) + 1);
    s ^= 0x13198a2e03707344ull * (static_cast<std::uint64_t>(spec.sample) + 1);
    s ^= 0xa4093822299f31d0ull * (static_cast<std::uint64_t>(spec.purpose) + 1);
    std::uint32_t words[8];
    for (auto& w : words) w = static_cast<std::uint32_t>(splitmix64(s));
    std::seed_seq seq(std::begin(words), std::end(words));
    eng_.seed(seq);
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() { return normal_(eng_); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free multiply-shift; bias < 2^-64, irrelevant here.
    __uint128_t m = static_cast<__uint128_t>(eng_()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace kuq
