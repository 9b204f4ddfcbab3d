#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gridfuse/estimation.hpp"
#include "gridfuse/simulator.hpp"

namespace gridfuse {

struct ErrorSeries {
  std::vector<double> timestamps;
  std::vector<double> errors;  // m, 3D distance to the reference
  std::size_t unmatched = 0;   // estimates without a reference sample in tolerance
};

/// Pairs each estimate with the nearest reference sample within `tolerance`
/// seconds. Truth must be sorted by time.
ErrorSeries error_series(std::span<const Estimate> estimates, std::span<const GroundTruthSample> truth,
                         double tolerance = 1e-3);

struct StatsSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double variance = 0.0;  // 1/(N-1); zero for a single sample
  double sigma1 = 0.0;    // 68.27th percentile
  double sigma2 = 0.0;    // 95.45th percentile
  double sigma3 = 0.0;    // 99.73th percentile
  double p25 = 0.0;
  double p50 = 0.0;
  double p75 = 0.0;
};

/// Nearest-rank percentile of an ascending sample, `pct` in [0, 100].
double nearest_rank(std::span<const double> sorted, double pct);

StatsSummary summarize(std::span<const double> series);

/// Right-continuous ECDF steps (value, F(value)), one per distinct value.
std::vector<std::pair<double, double>> ecdf(std::span<const double> series);

}  // namespace gridfuse
