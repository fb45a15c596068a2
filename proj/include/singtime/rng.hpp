#pragma once

// Seeding scheme shared by every randomised component.
//
// A master seed S and a stream index i give the sub-seed
//   splitmix64(S + 0x9E3779B97F4A7C15 * (i + 1)),
// which seeds a std::mt19937_64. Realization r of an ensemble uses stream r.

#include <cmath>
#include <cstdint>
#include <random>

namespace singtime::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

inline std::mt19937_64 engine(std::uint64_t master, std::uint64_t stream) {
  return std::mt19937_64(sub_seed(master, stream));
}

// Standard normal samples via Box-Muller on 53-bit uniforms. Written out so
// streams are identical across standard libraries.
class Normal {
public:
  double operator()(std::mt19937_64& gen) {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform(gen);
    } while (u1 <= 0.0);
    const double u2 = uniform(gen);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform on [0, 1) with 53 random bits.
  static double uniform(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1p-53; }

private:
  double spare_ = 0.0;
  bool have_spare_ = false;
};

} // namespace singtime::rng
