#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "cslie/groups.hpp"

namespace cslie {

/// mt19937_64 with a fixed uniform and Gaussian transform, so that a seed
/// gives the same stream on every standard library.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64/polar-gaussian";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Marsaglia polar method.
  double gaussian();
  double gaussian(double sigma) { return sigma * gaussian(); }

  VecX<double> gaussian_vector(int n, double sigma = 1.0);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Random tangent vector with N(0, scale^2) coordinates; rotation parts are
/// rescaled so their norm stays below max_angle.
Tangent<double> random_tangent(const GroupKind& kind, Rng& rng, double scale = 1.0,
                               double max_angle = 2.5);

Element<double> random_element(const GroupKind& kind, Rng& rng, double scale = 1.0);

}  // namespace cslie
