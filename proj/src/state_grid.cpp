#include "gridfuse/state_grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gridfuse {

double norm(const Vec3& v) { return std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z); }

GridSpec GridSpec::planar(Vec3 origin, double cell_size, int nx, int ny) {
  GridSpec spec{origin, cell_size, {nx, ny, 1}, 2};
  spec.validate();
  return spec;
}

GridSpec GridSpec::volumetric(Vec3 origin, double cell_size, int nx, int ny, int nz) {
  GridSpec spec{origin, cell_size, {nx, ny, nz}, 3};
  spec.validate();
  return spec;
}

void GridSpec::validate() const {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw InvalidArgument("grid cell_size must be positive and finite");
  }
  if (!std::isfinite(origin.x) || !std::isfinite(origin.y) || !std::isfinite(origin.z)) {
    throw InvalidArgument("grid origin must be finite");
  }
  if (dimensionality != 2 && dimensionality != 3) {
    throw InvalidArgument("grid dimensionality must be 2 or 3");
  }
  for (int axis = 0; axis < dimensionality; ++axis) {
    if (extent[axis] < 2) throw InvalidArgument("every grid extent must be at least 2");
  }
  if (dimensionality == 2 && extent[2] != 1) {
    throw InvalidArgument("planar grid must have a single z layer");
  }
}

std::size_t GridSpec::cell_count() const {
  return static_cast<std::size_t>(extent[0]) * static_cast<std::size_t>(extent[1]) *
         static_cast<std::size_t>(extent[2]);
}

bool GridSpec::contains(const CellCoords& c) const {
  for (int axis = 0; axis < 3; ++axis) {
    if (c[axis] < 0 || c[axis] >= extent[axis]) return false;
  }
  return true;
}

CellCoords GridSpec::coords(GridIndex index) const {
  const auto nx = static_cast<std::size_t>(extent[0]);
  const auto ny = static_cast<std::size_t>(extent[1]);
  const std::size_t i = index.value;
  return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny),
          static_cast<int>(i / (nx * ny))};
}

GridIndex GridSpec::index(const CellCoords& c) const {
  const auto nx = static_cast<std::size_t>(extent[0]);
  const auto ny = static_cast<std::size_t>(extent[1]);
  return {static_cast<std::size_t>(c[0]) +
          nx * (static_cast<std::size_t>(c[1]) + ny * static_cast<std::size_t>(c[2]))};
}

Vec3 GridSpec::position(const CellCoords& c) const {
  return {origin.x + cell_size * c[0], origin.y + cell_size * c[1], origin.z + cell_size * c[2]};
}

Vec3 GridSpec::position(GridIndex index) const { return position(coords(index)); }

GridIndex GridSpec::nearest(const Vec3& p) const {
  auto snap = [&](double value, double base, int n) {
    const long cell = std::lround((value - base) / cell_size);
    return static_cast<int>(std::clamp<long>(cell, 0, n - 1));
  };
  return index({snap(p.x, origin.x, extent[0]), snap(p.y, origin.y, extent[1]),
                snap(p.z, origin.z, extent[2])});
}

LikelihoodField::LikelihoodField(GridSpec spec, std::vector<double> mass)
    : spec_(spec), mass_(std::move(mass)) {
  spec_.validate();
  if (mass_.size() != spec_.cell_count()) {
    throw InvalidArgument("mass array length does not match grid cell count");
  }
  for (double m : mass_) {
    if (!(m >= 0.0) || !std::isfinite(m)) {
      throw InvalidArgument("cell mass must be finite and non-negative");
    }
  }
}

double LikelihoodField::total() const { return std::accumulate(mass_.begin(), mass_.end(), 0.0); }

LikelihoodField init_uniform(const GridSpec& spec) {
  spec.validate();
  const std::size_t n = spec.cell_count();
  return LikelihoodField(spec, std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

LikelihoodField normalize(const LikelihoodField& field) {
  const double sum = field.total();
  if (!(sum > 0.0)) throw DegenerateField("cannot normalize a field without positive mass");
  std::vector<double> out(field.mass().begin(), field.mass().end());
  const double eta = 1.0 / sum;
  for (double& m : out) m *= eta;
  return LikelihoodField(field.spec(), std::move(out));
}

LikelihoodField normalize_with_floor(const GridSpec& spec, std::vector<double> raw) {
  double peak = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0.0) throw DegenerateField("non-finite or negative cell value");
    peak = std::max(peak, v);
  }
  if (!(peak > 0.0)) throw DegenerateField("all cell values are zero");
  double sum = 0.0;
  for (double& v : raw) {
    // Division, not a reciprocal: 1 / peak overflows for subnormal peaks.
    v = std::max(v / peak, kMassFloor);
    sum += v;
  }
  const double eta = 1.0 / sum;
  for (double& v : raw) v *= eta;
  return LikelihoodField(spec, std::move(raw));
}

LikelihoodField recenter(const LikelihoodField& field, const Vec3& new_origin, double floor_mass) {
  const GridSpec& spec = field.spec();
  if (!(floor_mass >= 0.0)) throw InvalidArgument("recenter floor mass must be non-negative");
  const double d[3] = {new_origin.x - spec.origin.x, new_origin.y - spec.origin.y,
                       new_origin.z - spec.origin.z};
  CellCoords shift{};
  for (int axis = 0; axis < 3; ++axis) {
    const double cells = d[axis] / spec.cell_size;
    const double whole = std::round(cells);
    if (std::abs(cells - whole) > 1e-6) {
      throw InvalidArgument("recenter offset is not a whole number of cells");
    }
    shift[axis] = static_cast<int>(whole);
  }
  if (spec.dimensionality == 2 && shift[2] != 0) {
    throw InvalidArgument("planar grid cannot be shifted along z");
  }

  GridSpec moved = spec;
  moved.origin = spec.position(shift);
  if (shift == CellCoords{0, 0, 0}) return field;

  std::vector<double> out(spec.cell_count(), floor_mass);
  for (int z = 0; z < spec.extent[2]; ++z) {
    for (int y = 0; y < spec.extent[1]; ++y) {
      for (int x = 0; x < spec.extent[0]; ++x) {
        const CellCoords src{x + shift[0], y + shift[1], z + shift[2]};
        if (!spec.contains(src)) continue;
        out[moved.index({x, y, z}).value] = field[spec.index(src).value];
      }
    }
  }
  const double sum = std::accumulate(out.begin(), out.end(), 0.0);
  if (!(sum > 0.0)) throw DegenerateField("recentered field has no mass left");
  for (double& m : out) m /= sum;
  return LikelihoodField(moved, std::move(out));
}

}  // namespace gridfuse
