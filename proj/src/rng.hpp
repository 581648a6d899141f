#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace ptc {

// Counter-style seeding: every simulated event owns an independent stream
// derived from (master_seed, stream_index), so results do not depend on how
// events are partitioned across workers. The generator is xoshiro256++ with
// splitmix64 state expansion; distributions are generated from fixed closed
// forms rather than std::<distribution> so that output is reproducible
// across standard libraries.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// One-shot mix of (seed, index) into a single 64-bit value. Used for
// per-event stream derivation and for per-sweep-point seed derivation.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0xD1342543DE82EF95ull * (index + 1));
  return splitmix64(s);
}

class RngStream {
public:
  RngStream(std::uint64_t seed, std::uint64_t stream_index) {
    std::uint64_t sm = seed ^ (0xD1342543DE82EF95ull * (stream_index + 1));
    for (auto& w : state_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit mantissa.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [-1, 1); used for isotropic direction cosines.
  double uniform_sym() { return 2.0 * uniform() - 1.0; }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; consumes exactly two uniforms per call.
  double gaussian(double sigma) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return sigma * r * std::cos(2.0 * kPi * u2);
  }

  double exponential(double mean) {
    return -mean * std::log(1.0 - uniform());
  }

  // Centered Cauchy with the given full width at half maximum.
  double cauchy_fwhm(double fwhm) {
    return 0.5 * fwhm * std::tan(kPi * (uniform() - 0.5));
  }

private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
};

}  // namespace ptc
