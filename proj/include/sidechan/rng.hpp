#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace sidechan {

// splitmix64 finaliser; also used to derive independent stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t combine_keys(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(a ^ (mix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

/// Counter-based splitmix64 stream. Identical keys give identical sequences on every platform.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t key) noexcept : state_(key) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
  }

  /// Uniform in (0, 1); never returns 0 so it is safe under log().
  double uniform_open() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// One pair of independent standard normals (Box-Muller).
  void gaussian_pair(double& a, double& b) noexcept {
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double theta = 2.0 * std::numbers::pi * uniform_open();
    a = r * std::cos(theta);
    b = r * std::sin(theta);
  }

 private:
  std::uint64_t state_;
};

}  // namespace sidechan
