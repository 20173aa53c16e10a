#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace cofedrec {

// Deterministic RNG used everywhere in the simulator. The engine is
// std::mt19937_64 (fully specified by the standard); all distribution
// sampling is hand-rolled so results do not depend on the C++ library
// implementation. Every consumer derives its own stream from the master
// seed, which keeps runs bit-reproducible regardless of worker-thread
// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, bound) via rejection. bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform double in [0, 1) with 53 bits of randomness.
  double uniform_real() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform_real() < p; }

  // Box-Muller with a cached spare.
  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform_real() - 1.0;
      v = 2.0 * uniform_real() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return mean + stddev * u * scale;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Partial Fisher-Yates: after the call the first k slots hold a uniform
  // sample without replacement.
  template <typename T>
  void partial_shuffle(std::vector<T>& v, std::size_t k) {
    if (k > v.size()) k = v.size();
    for (std::size_t i = 0; i < k; ++i) {
      std::size_t j = i + static_cast<std::size_t>(uniform_index(v.size() - i));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64-style mixing, used to derive independent sub-stream seeds
// from (master seed, tag, tag, tag) tuples.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0,
                              std::uint64_t c = 0, std::uint64_t d = 0) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(a);
  h = mix(h ^ b);
  h = mix(h ^ c);
  h = mix(h ^ d);
  return h;
}

inline Rng derive_rng(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
  return Rng(mix_seed(master, a, b, c));
}

// Stream tags for the federation protocol. Fixed values so a run's random
// choices are stable across refactors.
namespace stream {
inline constexpr std::uint64_t kInit = 0x01;
inline constexpr std::uint64_t kTheta = 0x02;
inline constexpr std::uint64_t kEvalCandidates = 0x03;
inline constexpr std::uint64_t kValCandidates = 0x04;
inline constexpr std::uint64_t kParticipants = 0x05;
inline constexpr std::uint64_t kServer = 0x06;
inline constexpr std::uint64_t kClient = 0x07;
inline constexpr std::uint64_t kKmeans = 0x08;
inline constexpr std::uint64_t kSweep = 0x09;
inline constexpr std::uint64_t kDiagnose = 0x0a;
inline constexpr std::uint64_t kVirtual = 0x0b;
}  // namespace stream

}  // namespace cofedrec
