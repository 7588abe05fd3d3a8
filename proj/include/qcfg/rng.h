#pragma once

#include <cstdint>
#include <random>

namespace qcfg {

// Derives an independent stream seed from a base seed and a counter.
uint64_t MixSeed(uint64_t seed, uint64_t counter);

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n) { return std::uniform_int_distribution<uint64_t>(0, n - 1)(engine_); }
  double Normal(double stddev) { return std::normal_distribution<double>(0.0, stddev)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qcfg
