#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "gridfuse/state_grid.hpp"

namespace gridfuse {

/// Raised when EM cannot produce a non-degenerate mixture.
class CalibrationFailure : public Error {
 public:
  using Error::Error;
};

using Rng = std::mt19937_64;

struct GaussianModel {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Flat density on [lower, upper]; used for outlier channels.
struct UniformModel {
  double lower = -30.0;
  double upper = 30.0;
};

struct GmmComponent {
  double weight = 1.0;
  double mean = 0.0;
  double variance = 1.0;
};

struct GmmModel {
  std::vector<GmmComponent> components;
};

struct MixtureLikelihoodModel;

using NoiseModel = std::variant<GaussianModel, UniformModel, GmmModel,
                                std::shared_ptr<const MixtureLikelihoodModel>>;

/// phi * primary + (1 - phi) * secondary.
struct MixtureLikelihoodModel {
  double ratio = 0.9;
  NoiseModel primary;
  NoiseModel secondary;
};

NoiseModel make_mixture(double ratio, NoiseModel primary, NoiseModel secondary);

/// Throws InvalidArgument when a model violates its parameter invariants.
void validate(const NoiseModel& model);

/// Builds a GMM and checks weights sum to one. Use `renormalize` to rescale
/// weights that were reported with rounding or a dropped component.
GmmModel make_gmm(std::vector<GmmComponent> components, bool renormalize = false);

/// Gaussian for one component of a GMM.
GaussianModel component_gaussian(const GmmModel& gmm, std::size_t c);

double gaussian_pdf(double y, double mean, double stddev);

double density(const NoiseModel& model, double y);
double density(const GaussianModel& model, double y);
double density(const GmmModel& model, double y);

/// Evaluates the density for every value of `y` into `out` (same length).
void density_into(const NoiseModel& model, std::span<const double> y, std::span<double> out);

double model_mean(const NoiseModel& model);
double model_variance(const NoiseModel& model);

double sample(const NoiseModel& model, Rng& rng);

struct GmmFitOptions {
  int max_iterations = 500;
  /// Convergence threshold on the change of the mean per-sample log-likelihood.
  double tolerance = 1e-6;
  int max_restarts = 5;
  /// Also start from C-1 k-means clusters plus one broad low-weight component.
  bool background_start = true;
};

struct GmmFit {
  GmmModel model;
  /// Mean per-sample log-likelihood after every EM iteration of the accepted run.
  std::vector<double> log_likelihood;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

/// Expectation-maximization fit of a one-dimensional C-component GMM with
/// k-means++ seeding. Returns the start with the highest log-likelihood.
/// Throws InvalidArgument if fewer than 10*C residuals are given and
/// CalibrationFailure when every start degenerates `max_restarts` times.
GmmFit fit_gmm(std::span<const double> residuals, int components, std::uint64_t seed,
               const GmmFitOptions& options = {});

double mean_log_likelihood(const GmmModel& model, std::span<const double> data);

}  // namespace gridfuse
