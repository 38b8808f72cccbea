#ifndef QNDSIM_RNG_HPP
#define QNDSIM_RNG_HPP

#include <cstdint>
#include <random>

namespace qnd {

/// SplitMix64 finalizer, used to derive independent child seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of trajectory `index` inside an ensemble started from `master`.
constexpr std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Deterministic uniform stream on the open interval (0, 1).
///
/// mt19937_64 output is fixed by the standard, and the conversion to double
/// is done by hand so the stream is identical across standard libraries.
class uniform_stream {
 public:
  explicit uniform_stream(std::uint64_t seed) : engine_(seed) {}

  double next() {
    // 53 random bits, shifted half an ulp off zero: never 0, never 1.
    const auto bits = engine_() >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace qnd

#endif  // QNDSIM_RNG_HPP
