#pragma once

#include <limits>

#include "gridfuse/state_grid.hpp"

namespace gridfuse {

struct Estimate {
  double timestamp = 0.0;
  Vec3 position;
  GridIndex map_cell;
  double map_mass = 0.0;
  double radius = 0.0;
  int support_count = 0;
};

/// Highest-mass cell; ties go to the lowest linear index.
GridIndex map_estimate(const LikelihoodField& field);

struct WeightedMean {
  Vec3 position;
  int support_count = 0;
};

/// Mass-weighted centroid of the cells within `radius` of the centre cell.
/// An infinite radius uses the whole field.
WeightedMean weighted_mean(const LikelihoodField& field, GridIndex center, double radius);

/// MAP cell followed by the weighted mean around it.
Estimate estimate(const LikelihoodField& field, double radius, double timestamp = 0.0);

/// Trace of the mass-weighted position covariance of the whole field.
double covariance_trace(const LikelihoodField& field);

}  // namespace gridfuse
