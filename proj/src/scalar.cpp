#include "cslie/scalar.hpp"

#include "cslie/errors.hpp"

namespace cslie {

bool all_finite(double x) { return std::isfinite(x); }
bool all_finite(const cd& x) {
  return std::isfinite(x.real()) && std::isfinite(x.imag());
}

template <Scalar S>
S atan2_cs(const S& y, const S& x) {
  const double xr = real_part(x);
  const double yr = real_part(y);
  if (xr == 0.0 && yr == 0.0) {
    throw DomainError("atan2 undefined: both arguments have zero real part");
  }
  const double angle = std::atan2(yr, xr);
  if constexpr (is_complex_v<S>) {
    const double d = (xr * imag_part(y) - yr * imag_part(x)) / (xr * xr + yr * yr);
    return {angle, d};
  } else {
    return angle;
  }
}

template double atan2_cs<double>(const double&, const double&);
template cd atan2_cs<cd>(const cd&, const cd&);

}  // namespace cslie
