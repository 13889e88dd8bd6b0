#include "cslie/random.hpp"

#include <cmath>

namespace cslie {

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

VecX<double> Rng::gaussian_vector(int n, double sigma) {
  VecX<double> v(n);
  for (int i = 0; i < n; ++i) v(i) = gaussian(sigma);
  return v;
}

namespace {

void clamp_angle(VecX<double>& c, int offset, int len, double max_angle) {
  const double a = c.segment(offset, len).norm();
  if (a > max_angle) c.segment(offset, len) *= max_angle / a;
}

}  // namespace

Tangent<double> random_tangent(const GroupKind& kind, Rng& rng, double scale,
                               double max_angle) {
  VecX<double> c = rng.gaussian_vector(kind.dof(), scale);
  for (int k = 0; k < kind.block_count(); ++k) {
    const auto& b = kind.block(k);
    const int o = kind.dof_offset(k);
    switch (b.tag()) {
      case GroupKind::Tag::SO3:
      case GroupKind::Tag::SE3:
      case GroupKind::Tag::SE23:
        clamp_angle(c, o, 3, max_angle);
        break;
      case GroupKind::Tag::SE2:
        clamp_angle(c, o, 1, max_angle);
        break;
      default:
        break;
    }
  }
  return Tangent<double>(kind, std::move(c));
}

Element<double> random_element(const GroupKind& kind, Rng& rng, double scale) {
  return exp_map(random_tangent(kind, rng, scale));
}

}  // namespace cslie
