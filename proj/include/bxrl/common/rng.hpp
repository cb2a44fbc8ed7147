#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace bxrl {

// Deterministic random stream. Conversions from raw 64-bit draws are done
// here rather than through <random> distributions so that sequences are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream identified by (seed, name).
  static Rng stream(std::uint64_t seed, std::string_view name);
  static Rng stream(std::uint64_t seed, std::string_view name, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer on [0, n).
  int uniform_int(int n);
  double normal();

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace bxrl
