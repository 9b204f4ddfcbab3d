#pragma once

#include <optional>
#include <vector>

#include "gridfuse/state_grid.hpp"

namespace gridfuse {

/// Odometry-style motion over one prediction horizon. The distance residual
/// v*dt - d is scored with standard deviation sigma_speed * dt.
struct MotionInput {
  double speed = 0.0;             // m/s
  std::optional<double> heading;  // rad; absent means isotropic
  double sigma_speed = 0.5;       // m/s
  double sigma_heading = 0.2;     // rad
  double dt = 1.0;                // s

  void validate() const;
};

/// Which form of the motion update to apply.
enum class PredictionVariant {
  /// p'_i = eta * sum_j K(i <- j) p_j, the transition likelihood weighted by source mass.
  kSourceWeighted,
  /// p'_i = eta * (sum_j Kv(i,j)) * (sum_j Kh(i,j)) * p_i, without source weighting.
  kLiteral,
};

struct PredictionOptions {
  PredictionVariant variant = PredictionVariant::kSourceWeighted;
  /// Sources holding less than this fraction of the peak mass are skipped.
  double source_prune_ratio = 0.0;
  /// Kernel entries below this fraction of the kernel peak are dropped.
  double kernel_prune_ratio = 0.0;
  /// Transitions are truncated to distance v*dt + 6*sigma_speed*dt + 6*cell_size.
  bool truncate = true;
  /// Random-walk speed std used when no motion input is available, m/s.
  double random_walk_sigma = 0.5;
};

/// In-plane cell offsets with their length and bearing for one grid lattice.
/// Grid spacing is uniform, so d_{i,j} and alpha_{i,j} depend only on the
/// offset between cells and are cached once per offset.
class TransitionWorkspace {
 public:
  struct Offset {
    int dx = 0;
    int dy = 0;
    double distance = 0.0;  // m
    double bearing = 0.0;   // rad, from source to target
  };

  /// Covers every non-zero offset no longer than `max_radius` metres (clamped
  /// to the grid diagonal).
  TransitionWorkspace(const GridSpec& grid, double max_radius);
  /// Covers the full grid.
  explicit TransitionWorkspace(const GridSpec& grid);

  const GridSpec& grid() const { return grid_; }
  double max_radius() const { return max_radius_; }
  const std::vector<Offset>& offsets() const { return offsets_; }

  /// Distance and bearing from `from` to `to`; both must lie in one z layer.
  double distance(GridIndex from, GridIndex to) const;
  double bearing(GridIndex from, GridIndex to) const;

  bool compatible(const GridSpec& grid) const;

 private:
  GridSpec grid_;
  double max_radius_ = 0.0;
  std::vector<Offset> offsets_;
};

/// Radius beyond which transitions are ignored for the given motion.
double truncation_radius(const MotionInput& motion, double cell_size);

/// Dense kernel over offsets in [-r, r]^2 cells; entry (dy + r) * (2r + 1) + (dx + r)
/// holds the transition likelihood from a source to source + (dx, dy).
struct MotionKernel {
  int half_width = 0;
  std::vector<double> weights;
};

enum class KernelTerm { kVelocity, kHeading, kJoint };

MotionKernel build_kernel(const std::optional<MotionInput>& motion, const TransitionWorkspace& ws,
                          KernelTerm term, const PredictionOptions& options = {});

/// Source-weighted velocity likelihood per target cell (not normalized).
std::vector<double> predict_velocity(const LikelihoodField& posterior, const MotionInput& motion,
                                     const TransitionWorkspace& ws,
                                     const PredictionOptions& options = {});

/// Source-weighted heading likelihood per target cell (not normalized).
std::vector<double> predict_heading(const LikelihoodField& posterior, const MotionInput& motion,
                                    const TransitionWorkspace& ws,
                                    const PredictionOptions& options = {});

/// Full motion update. Without heading the heading term is 1; without any
/// motion input a Gaussian random walk of std random_walk_sigma * dt is used
/// (dt then comes from `random_walk_dt`).
LikelihoodField predict(const LikelihoodField& posterior, const std::optional<MotionInput>& motion,
                        const TransitionWorkspace& ws, const PredictionOptions& options = {},
                        double random_walk_dt = 1.0);

inline LikelihoodField predict(const LikelihoodField& posterior, const MotionInput& motion,
                               const TransitionWorkspace& ws, const PredictionOptions& options = {}) {
  return predict(posterior, std::optional<MotionInput>(motion), ws, options, motion.dt);
}

}  // namespace gridfuse
