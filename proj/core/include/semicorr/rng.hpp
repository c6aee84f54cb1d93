#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace semicorr {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: draw i of the stream keyed by (seed, a, b) is a
// pure function of (seed, a, b, i), so any schedule reproduces it.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0) {
    key_ = splitmix64(seed);
    key_ = splitmix64(key_ ^ (a + 0x632be59bd9b4e019ULL));
    key_ = splitmix64(key_ ^ (b + 0x85157af5ULL));
  }

  std::uint64_t at(std::uint64_t i) const { return splitmix64(key_ + i * 0x9e3779b97f4a7c15ULL); }
  std::uint64_t next_u64() { return at(counter_++); }
  // Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }
  // Standard normal by Box-Muller; values come in pairs.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform(), u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  void fill_normal(std::span<double> out, double scale = 1.0) {
    for (double& v : out) v = scale * normal();
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace semicorr
