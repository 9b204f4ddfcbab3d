#pragma once

#include <string>
#include <vector>

#include "gridfuse/state_grid.hpp"

namespace gridfuse {

inline constexpr double kSpeedOfLight = 299'792'458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

enum class ReferenceKind { kSatellite, kAnchor };

struct ReferencePoint {
  std::string id;
  Vec3 position;
  ReferenceKind kind = ReferenceKind::kAnchor;
};

/// Per-cell geometric relation between a reference and every grid point.
using Gamma = std::vector<double>;

/// Per-cell innovation Z - Gamma.
using Innovation = std::vector<double>;

/// Wraps an angle to (-pi, pi].
double wrap_angle(double angle);

/// Euclidean distance from each grid point to the reference. On planar grids
/// the z difference is taken against the grid plane height.
Gamma gamma_distance(const ReferencePoint& ref, const GridSpec& grid);

/// Range difference ||a - x_i|| - ||b - x_i||. Throws InvalidArgument for coincident refs.
Gamma gamma_hyperbolic(const ReferencePoint& ref_a, const ReferencePoint& ref_b,
                       const GridSpec& grid);

/// Four-quadrant bearing atan2(y_ref - y_i, x_ref - x_i), counter-clockwise from +x.
/// Cells coincident with the reference in x-y hold NaN and must be skipped by callers.
Gamma gamma_angle(const ReferencePoint& ref, const GridSpec& grid);

Innovation innovations(double observation, const Gamma& gamma, bool wrap);

}  // namespace gridfuse
