#include "gridfuse/estimation.hpp"

#include <cmath>

namespace gridfuse {

GridIndex map_estimate(const LikelihoodField& field) {
  const auto mass = field.mass();
  std::size_t best = 0;
  for (std::size_t i = 1; i < mass.size(); ++i) {
    if (mass[i] > mass[best]) best = i;
  }
  if (!(mass[best] > 0.0)) throw DegenerateField("no cell carries positive mass");
  return GridIndex{best};
}

WeightedMean weighted_mean(const LikelihoodField& field, GridIndex center, double radius) {
  const GridSpec& g = field.spec();
  if (!(radius >= 0.0)) throw InvalidArgument("weighted mean radius must be non-negative");
  const Vec3 c = g.position(center);
  const auto cc = g.coords(center);
  // Only cells inside the bounding cube of the radius can qualify.
  const double reach_cells = std::isinf(radius) ? 1e9 : std::floor(radius / g.cell_size + 1e-9);
  CellCoords lo{}, hi{};
  for (int axis = 0; axis < 3; ++axis) {
    const double reach = std::min(reach_cells, static_cast<double>(g.extent[axis]));
    lo[axis] = std::max(0, cc[axis] - static_cast<int>(reach));
    hi[axis] = std::min(g.extent[axis] - 1, cc[axis] + static_cast<int>(reach));
  }
  const double r2 = radius * radius;
  double sw = 0.0, sx = 0.0, sy = 0.0, sz = 0.0;
  int count = 0;
  for (int z = lo[2]; z <= hi[2]; ++z) {
    for (int y = lo[1]; y <= hi[1]; ++y) {
      for (int x = lo[0]; x <= hi[0]; ++x) {
        const Vec3 p = g.position(CellCoords{x, y, z});
        const Vec3 d = p - c;
        if (!std::isinf(radius) && d.x * d.x + d.y * d.y + d.z * d.z > r2 * (1.0 + 1e-12)) continue;
        const double m = field[g.index({x, y, z}).value];
        sw += m;
        sx += m * p.x;
        sy += m * p.y;
        sz += m * p.z;
        ++count;
      }
    }
  }
  if (!(sw > 0.0)) return {c, count};
  return {{sx / sw, sy / sw, sz / sw}, count};
}

Estimate estimate(const LikelihoodField& field, double radius, double timestamp) {
  const GridIndex map = map_estimate(field);
  const WeightedMean wm = weighted_mean(field, map, radius);
  return {timestamp, wm.position, map, field[map.value], radius, wm.support_count};
}

double covariance_trace(const LikelihoodField& field) {
  const GridSpec& g = field.spec();
  double sw = 0.0;
  Vec3 mean{};
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Vec3 p = g.position(GridIndex{i});
    sw += field[i];
    mean = mean + field[i] * p;
  }
  if (!(sw > 0.0)) throw DegenerateField("no cell carries positive mass");
  mean = (1.0 / sw) * mean;
  double trace = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const Vec3 d = g.position(GridIndex{i}) - mean;
    trace += field[i] * (d.x * d.x + d.y * d.y + d.z * d.z);
  }
  return trace / sw;
}

}  // namespace gridfuse
