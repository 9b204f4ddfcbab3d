#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridfuse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Raised when a field has no positive mass left to normalize.
class DegenerateField : public Error {
 public:
  using Error::Error;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double norm(const Vec3& v);

/// Per-cell mass floor applied before normalization of filter products.
inline constexpr double kMassFloor = 1e-300;

struct GridIndex {
  std::size_t value = 0;
  friend auto operator<=>(const GridIndex&, const GridIndex&) = default;
};

using CellCoords = std::array<int, 3>;

/// Equidistant, axis-aligned lattice. Cell (0,0,0) sits at `origin`; a 2D grid
/// has extent[2] == 1 and lies in the plane z = origin.z.
struct GridSpec {
  Vec3 origin;
  double cell_size = 1.0;
  std::array<int, 3> extent{2, 2, 1};
  int dimensionality = 2;

  static GridSpec planar(Vec3 origin, double cell_size, int nx, int ny);
  static GridSpec volumetric(Vec3 origin, double cell_size, int nx, int ny, int nz);

  /// Throws InvalidArgument when the spec breaks a lattice invariant.
  void validate() const;

  std::size_t cell_count() const;
  bool contains(const CellCoords& c) const;
  CellCoords coords(GridIndex index) const;
  GridIndex index(const CellCoords& c) const;
  Vec3 position(GridIndex index) const;
  Vec3 position(const CellCoords& c) const;
  /// Cell whose centre is closest to `p` (clamped to the grid).
  GridIndex nearest(const Vec3& p) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Probability mass over the cells of a GridSpec.
class LikelihoodField {
 public:
  LikelihoodField(GridSpec spec, std::vector<double> mass);

  const GridSpec& spec() const { return spec_; }
  std::span<const double> mass() const { return mass_; }
  double operator[](std::size_t i) const { return mass_[i]; }
  std::size_t size() const { return mass_.size(); }
  double total() const;

 private:
  GridSpec spec_;
  std::vector<double> mass_;
};

LikelihoodField init_uniform(const GridSpec& spec);

/// Scales the field to unit total mass. Throws DegenerateField if nothing is positive.
LikelihoodField normalize(const LikelihoodField& field);

/// Normalizes raw non-negative cell values produced by a filter step: the values
/// are rescaled by their maximum, floored at kMassFloor and brought to unit mass.
/// Throws DegenerateField when every value is zero or any value is not finite.
LikelihoodField normalize_with_floor(const GridSpec& spec, std::vector<double> raw);

/// Moves the grid so that cell (0,0,0) lands on `new_origin`, which must be a
/// whole number of cells away from the current origin. Cells entering the grid
/// receive `floor_mass` before renormalization.
LikelihoodField recenter(const LikelihoodField& field, const Vec3& new_origin,
                         double floor_mass = kMassFloor);

}  // namespace gridfuse
