#include "gridfuse/prediction.hpp"

#include <algorithm>
#include <cmath>

#include "gridfuse/geometry.hpp"
#include "gridfuse/noise_models.hpp"

namespace gridfuse {

void MotionInput::validate() const {
  if (!(speed >= 0.0) || !std::isfinite(speed)) throw InvalidArgument("speed must be >= 0");
  if (heading && !std::isfinite(*heading)) throw InvalidArgument("heading must be finite");
  if (!(sigma_speed > 0.0)) throw InvalidArgument("speed std must be positive");
  if (!(sigma_heading > 0.0)) throw InvalidArgument("heading std must be positive");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("prediction horizon must be positive");
}

TransitionWorkspace::TransitionWorkspace(const GridSpec& grid, double max_radius) : grid_(grid) {
  grid_.validate();
  const double diagonal =
      grid_.cell_size * std::hypot(grid_.extent[0] - 1.0, grid_.extent[1] - 1.0);
  max_radius_ = std::clamp(max_radius, 0.0, diagonal);
  const int half = std::min(static_cast<int>(std::floor(max_radius_ / grid_.cell_size + 1e-9)),
                            std::max(grid_.extent[0], grid_.extent[1]) - 1);
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const double d = grid_.cell_size * std::hypot(static_cast<double>(dx), static_cast<double>(dy));
      if (d > max_radius_ * (1.0 + 1e-12)) continue;
      offsets_.push_back({dx, dy, d, std::atan2(static_cast<double>(dy), static_cast<double>(dx))});
    }
  }
}

TransitionWorkspace::TransitionWorkspace(const GridSpec& grid)
    : TransitionWorkspace(grid, grid.cell_size *
                                    std::hypot(grid.extent[0] - 1.0, grid.extent[1] - 1.0)) {}

double TransitionWorkspace::distance(GridIndex from, GridIndex to) const {
  const auto a = grid_.coords(from);
  const auto b = grid_.coords(to);
  if (a[2] != b[2]) throw InvalidArgument("transitions stay within one z layer");
  return grid_.cell_size * std::hypot(static_cast<double>(b[0] - a[0]), static_cast<double>(b[1] - a[1]));
}

double TransitionWorkspace::bearing(GridIndex from, GridIndex to) const {
  const auto a = grid_.coords(from);
  const auto b = grid_.coords(to);
  if (a[2] != b[2]) throw InvalidArgument("transitions stay within one z layer");
  if (a == b) throw InvalidArgument("bearing is undefined for a self transition");
  return std::atan2(static_cast<double>(b[1] - a[1]), static_cast<double>(b[0] - a[0]));
}

bool TransitionWorkspace::compatible(const GridSpec& grid) const {
  return grid.cell_size == grid_.cell_size && grid.extent == grid_.extent &&
         grid.dimensionality == grid_.dimensionality;
}

double truncation_radius(const MotionInput& motion, double cell_size) {
  return motion.speed * motion.dt + 6.0 * motion.sigma_speed * motion.dt + 6.0 * cell_size;
}

namespace {

constexpr double kIsotropicHeading = 1.0 / (2.0 * kPi);

struct KernelRows {
  MotionKernel kernel;
  // First and one-past-last non-zero column per row.
  std::vector<int> lo;
  std::vector<int> hi;
};

KernelRows index_rows(MotionKernel kernel) {
  const int w = 2 * kernel.half_width + 1;
  KernelRows rows{std::move(kernel), std::vector<int>(w, 0), std::vector<int>(w, 0)};
  for (int r = 0; r < w; ++r) {
    int lo = w, hi = 0;
    for (int c = 0; c < w; ++c) {
      if (rows.kernel.weights[r * w + c] != 0.0) {
        lo = std::min(lo, c);
        hi = c + 1;
      }
    }
    rows.lo[r] = lo < hi ? lo : 0;
    rows.hi[r] = lo < hi ? hi : 0;
  }
  return rows;
}

// out_t += K(t - s) * p_s for every source s with enough mass.
std::vector<double> scatter(const LikelihoodField& field, const KernelRows& rows,
                            double source_prune_ratio) {
  const GridSpec& g = field.spec();
  const int nx = g.extent[0], ny = g.extent[1], nz = g.extent[2];
  const int h = rows.kernel.half_width;
  const int w = 2 * h + 1;
  const auto mass = field.mass();
  double peak = 0.0;
  for (double m : mass) peak = std::max(peak, m);
  const double threshold = source_prune_ratio * peak;

  std::vector<double> out(mass.size(), 0.0);
  const std::size_t layer = static_cast<std::size_t>(nx) * ny;
  for (int z = 0; z < nz; ++z) {
    double* out_layer = out.data() + z * layer;
    const double* in_layer = mass.data() + z * layer;
    for (int y = 0; y < ny; ++y) {
      for (int x = 0; x < nx; ++x) {
        const double p = in_layer[static_cast<std::size_t>(y) * nx + x];
        if (p == 0.0 || p < threshold) continue;
        const int ky_lo = std::max(-h, -y);
        const int ky_hi = std::min(h, ny - 1 - y);
        for (int ky = ky_lo; ky <= ky_hi; ++ky) {
          const int r = ky + h;
          // Kernel columns c map to target x + c - h.
          const int c_lo = std::max(rows.lo[r], h - x);
          const int c_hi = std::min(rows.hi[r], nx + h - x);
          if (c_lo >= c_hi) continue;
          const double* krow = rows.kernel.weights.data() + r * w;
          const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(y + ky) * nx + (x - h);
          for (int c = c_lo; c < c_hi; ++c) out_layer[base + c] += p * krow[c];
        }
      }
    }
  }
  return out;
}

double kernel_radius(const std::optional<MotionInput>& motion, const TransitionWorkspace& ws,
                     const PredictionOptions& options, double random_walk_dt) {
  const double cell = ws.grid().cell_size;
  if (!options.truncate) return ws.max_radius();
  double r;
  if (motion) {
    r = truncation_radius(*motion, cell);
  } else {
    r = 6.0 * options.random_walk_sigma * random_walk_dt + 6.0 * cell;
  }
  return std::min(r, ws.max_radius());
}

MotionKernel build_kernel_impl(const std::optional<MotionInput>& motion, const TransitionWorkspace& ws,
                               KernelTerm term, const PredictionOptions& options,
                               double random_walk_dt, bool include_self) {
  const double cell = ws.grid().cell_size;
  const double radius = kernel_radius(motion, ws, options, random_walk_dt);
  const int half = static_cast<int>(std::floor(radius / cell + 1e-9));
  const int w = 2 * half + 1;
  MotionKernel kernel{half, std::vector<double>(static_cast<std::size_t>(w) * w, 0.0)};

  auto velocity = [&](double d) {
    if (!motion) {
      return gaussian_pdf(d, 0.0, options.random_walk_sigma * random_walk_dt);
    }
    return gaussian_pdf(motion->speed * motion->dt - d, 0.0, motion->sigma_speed * motion->dt);
  };
  auto heading = [&](double bearing) {
    if (!motion || !motion->heading) return 1.0;
    return gaussian_pdf(wrap_angle(*motion->heading - bearing), 0.0, motion->sigma_heading);
  };
  const double self_heading = (motion && motion->heading) ? kIsotropicHeading : 1.0;

  auto weight = [&](double v, double hd) {
    switch (term) {
      case KernelTerm::kVelocity: return v;
      case KernelTerm::kHeading: return hd;
      case KernelTerm::kJoint: break;
    }
    return v * hd;
  };

  for (const auto& o : ws.offsets()) {
    if (o.distance > radius * (1.0 + 1e-12)) continue;
    if (std::abs(o.dx) > half || std::abs(o.dy) > half) continue;
    kernel.weights[(o.dy + half) * w + (o.dx + half)] = weight(velocity(o.distance), heading(o.bearing));
  }
  if (include_self) {
    kernel.weights[half * w + half] = weight(velocity(0.0), self_heading);
  }

  if (options.kernel_prune_ratio > 0.0) {
    const double peak = *std::max_element(kernel.weights.begin(), kernel.weights.end());
    for (double& k : kernel.weights) {
      if (k < options.kernel_prune_ratio * peak) k = 0.0;
    }
  }
  return kernel;
}

std::vector<double> literal_prediction(const LikelihoodField& posterior,
                                       const std::optional<MotionInput>& motion,
                                       const TransitionWorkspace& ws,
                                       const PredictionOptions& options, double random_walk_dt) {
  // Sum over j != i of Kv(i -> j) and of Kh(i -> j), then scale p_i.
  const auto kv = build_kernel_impl(motion, ws, KernelTerm::kVelocity, options, random_walk_dt, false);
  const auto kh = build_kernel_impl(motion, ws, KernelTerm::kHeading, options, random_walk_dt, false);
  const GridSpec& g = posterior.spec();
  const int nx = g.extent[0], ny = g.extent[1];
  const int h = kv.half_width, w = 2 * h + 1;
  std::vector<double> out(posterior.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto c = g.coords(GridIndex{i});
    double sv = 0.0, sh = 0.0;
    for (int dy = -h; dy <= h; ++dy) {
      const int ty = c[1] + dy;
      if (ty < 0 || ty >= ny) continue;
      for (int dx = -h; dx <= h; ++dx) {
        const int tx = c[0] + dx;
        if (tx < 0 || tx >= nx) continue;
        const std::size_t k = static_cast<std::size_t>(dy + h) * w + (dx + h);
        sv += kv.weights[k];
        sh += kh.weights[k];
      }
    }
    out[i] = sv * sh * posterior[i];
  }
  return out;
}

void check_inputs(const LikelihoodField& posterior, const TransitionWorkspace& ws) {
  if (!ws.compatible(posterior.spec())) {
    throw InvalidArgument("transition workspace was built for a different grid lattice");
  }
}

}  // namespace

MotionKernel build_kernel(const std::optional<MotionInput>& motion, const TransitionWorkspace& ws,
                          KernelTerm term, const PredictionOptions& options) {
  if (motion) motion->validate();
  return build_kernel_impl(motion, ws, term, options, motion ? motion->dt : 1.0, true);
}

std::vector<double> predict_velocity(const LikelihoodField& posterior, const MotionInput& motion,
                                     const TransitionWorkspace& ws, const PredictionOptions& options) {
  check_inputs(posterior, ws);
  const auto rows = index_rows(build_kernel(motion, ws, KernelTerm::kVelocity, options));
  return scatter(posterior, rows, options.source_prune_ratio);
}

std::vector<double> predict_heading(const LikelihoodField& posterior, const MotionInput& motion,
                                    const TransitionWorkspace& ws, const PredictionOptions& options) {
  check_inputs(posterior, ws);
  const auto rows = index_rows(build_kernel(motion, ws, KernelTerm::kHeading, options));
  return scatter(posterior, rows, options.source_prune_ratio);
}

LikelihoodField predict(const LikelihoodField& posterior, const std::optional<MotionInput>& motion,
                        const TransitionWorkspace& ws, const PredictionOptions& options,
                        double random_walk_dt) {
  check_inputs(posterior, ws);
  if (motion) motion->validate();
  if (!motion && !(random_walk_dt > 0.0 && options.random_walk_sigma > 0.0)) {
    throw InvalidArgument("random walk prediction needs positive dt and sigma");
  }
  const double dt = motion ? motion->dt : random_walk_dt;
  if (options.variant == PredictionVariant::kLiteral) {
    return normalize_with_floor(posterior.spec(),
                                literal_prediction(posterior, motion, ws, options, dt));
  }
  const auto rows =
      index_rows(build_kernel_impl(motion, ws, KernelTerm::kJoint, options, dt, true));
  return normalize_with_floor(posterior.spec(), scatter(posterior, rows, options.source_prune_ratio));
}

}  // namespace gridfuse
