#include "gridfuse/geometry.hpp"

#include <cmath>
#include <limits>

namespace gridfuse {

double wrap_angle(double angle) {
  if (!std::isfinite(angle)) return angle;
  constexpr double two_pi = 2.0 * kPi;
  double wrapped = std::remainder(angle, two_pi);  // [-pi, pi]
  if (wrapped <= -kPi) wrapped += two_pi;
  return wrapped;
}

Gamma gamma_distance(const ReferencePoint& ref, const GridSpec& grid) {
  const std::size_t n = grid.cell_count();
  Gamma out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = norm(ref.position - grid.position(GridIndex{i}));
  }
  return out;
}

Gamma gamma_hyperbolic(const ReferencePoint& ref_a, const ReferencePoint& ref_b,
                       const GridSpec& grid) {
  if (ref_a.position == ref_b.position) {
    throw InvalidArgument("hyperbolic relation needs two distinct reference positions");
  }
  const std::size_t n = grid.cell_count();
  Gamma out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x = grid.position(GridIndex{i});
    out[i] = norm(ref_a.position - x) - norm(ref_b.position - x);
  }
  return out;
}

Gamma gamma_angle(const ReferencePoint& ref, const GridSpec& grid) {
  const std::size_t n = grid.cell_count();
  Gamma out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 x = grid.position(GridIndex{i});
    const double dx = ref.position.x - x.x;
    const double dy = ref.position.y - x.y;
    if (dx == 0.0 && dy == 0.0) {
      out[i] = std::numeric_limits<double>::quiet_NaN();
    } else {
      out[i] = wrap_angle(std::atan2(dy, dx));
    }
  }
  return out;
}

Innovation innovations(double observation, const Gamma& gamma, bool wrap) {
  Innovation out(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    const double y = observation - gamma[i];
    out[i] = wrap ? wrap_angle(y) : y;
  }
  return out;
}

}  // namespace gridfuse
