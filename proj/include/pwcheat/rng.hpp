#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace pwcheat {

/// Seeded normal deviates that are bit-identical on every platform.
///
/// Engine: std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Uniforms: the top 53 bits mapped to (0,1]. Normals: Box-Muller,
/// both members of each pair used (cosine first). The standard library's
/// distribution objects are avoided because their algorithms are
/// implementation-defined.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in (0, 1].
  double uniform() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double radius = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pwcheat
