#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace gmap {

// Counter-based generator: every draw is a pure function of (seed, counter),
// so parallel consumers can index into disjoint counter ranges and produce
// results independent of scheduling.
struct CounterRng {
  std::uint64_t seed = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Derive an independent stream, e.g. one per mixture component.
  CounterRng split(std::uint64_t stream) const { return CounterRng{mix(seed ^ mix(stream))}; }

  /// Uniform in (0, 1]; never returns 0 so it is safe under log().
  double uniform(std::uint64_t counter) const {
    std::uint64_t bits = mix(seed ^ mix(counter + 0x632be59bd9b4e019ULL));
    return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Box-Muller: two standard normal deviates from counters (2c, 2c+1).
  std::pair<double, double> normal_pair(std::uint64_t pair_counter) const {
    const double u1 = uniform(2 * pair_counter);
    const double u2 = uniform(2 * pair_counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  /// The idx-th standard normal deviate of this stream.
  double normal(std::uint64_t idx) const {
    auto [z0, z1] = normal_pair(idx / 2);
    return (idx % 2 == 0) ? z0 : z1;
  }
};

}  // namespace gmap
