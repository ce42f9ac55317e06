#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace srl {

// Deterministic random source. Distribution transforms are hand-rolled on top
// of mt19937_64 so streams are bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 bits of entropy.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Draws two uniforms per call.
  double normal();

  // Uniform index in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Index sampled proportionally to non-negative weights.
  int categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

// Stateless seed derivation for independent substreams. Mixing is
// splitmix64-style so nearby inputs give unrelated outputs.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace srl
