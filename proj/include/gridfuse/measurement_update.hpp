#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gridfuse/geometry.hpp"
#include "gridfuse/noise_models.hpp"
#include "gridfuse/state_grid.hpp"

namespace gridfuse {

enum class Visibility { kLos, kNlos };

struct RangeObservation {
  std::string anchor_id;
  double range = 0.0;  // m
};

struct RangeDifferenceObservation {
  std::string ref_a_id;
  std::string ref_b_id;
  double difference = 0.0;  // m, ||a - x|| - ||b - x||
};

struct AngleObservation {
  std::string anchor_id;
  double angle = 0.0;  // rad, bearing from the receiver to the anchor
};

struct SatelliteObservation {
  std::string sat_id;
  Vec3 position;
  double pseudorange = 0.0;  // m, clock/atmosphere corrected
  Visibility visibility = Visibility::kLos;
};

struct GnssPseudoranges {
  std::vector<SatelliteObservation> satellites;
};

struct OdometryObservation {
  double speed = 0.0;             // m/s over ground
  std::optional<double> heading;  // rad, counter-clockwise from +x; absent when unknown
};

using Payload = std::variant<RangeObservation, RangeDifferenceObservation, AngleObservation,
                             GnssPseudoranges, OdometryObservation>;

struct Observation {
  double timestamp = 0.0;
  Payload payload;
};

/// Predicted line-of-sight state of a satellite at an epoch.
using VisibilityOracle = std::function<Visibility(const std::string& sat_id, double epoch)>;

enum class CombineMode { kSum, kProduct };

using AnchorMap = std::map<std::string, ReferencePoint>;

/// Noise models routed by the predicted visibility of a differenced pair (a, b),
/// where the single difference is rho_a - rho_b.
struct GnssCaseModels {
  NoiseModel los_los;
  NoiseModel nlos_los;  // a NLOS, b LOS: positively biased
  NoiseModel los_nlos;  // a LOS, b NLOS: negatively biased

  /// First three components of a residual GMM, in case order.
  static GnssCaseModels from_gmm(const GmmModel& gmm);
  /// Zero-mean Gaussian with sqrt(2) * sigma_pseudorange for every case.
  static GnssCaseModels gaussian(double sigma_pseudorange);
};

/// Model used for pair (a, b); nullopt when both are NLOS and the pair is ignored.
std::optional<NoiseModel> select_case_model(const GnssCaseModels& models, Visibility a,
                                            Visibility b);

using CellLikelihood = std::vector<double>;

const ReferencePoint& find_anchor(const AnchorMap& anchors, const std::string& id);

CellLikelihood range_likelihood(const GridSpec& grid, const RangeObservation& obs,
                                const ReferencePoint& anchor, const NoiseModel& model);
CellLikelihood tdoa_likelihood(const GridSpec& grid, const RangeDifferenceObservation& obs,
                               const ReferencePoint& ref_a, const ReferencePoint& ref_b,
                               const NoiseModel& model);
/// Cells coincident with the anchor have no bearing; they receive the mean
/// likelihood of the remaining cells so their posterior follows the prior.
CellLikelihood aoa_likelihood(const GridSpec& grid, const AngleObservation& obs,
                              const ReferencePoint& anchor, const NoiseModel& model);

/// Innovation Delta rho - (d_a - d_b) per cell for one ordered pair.
Innovation bssd_innovations(const GridSpec& grid, const SatelliteObservation& a,
                            const SatelliteObservation& b);

/// Likelihood arrays for every ordered satellite pair that is not NLOS-NLOS.
std::vector<CellLikelihood> gnss_pair_likelihoods(const GridSpec& grid, const GnssPseudoranges& obs,
                                                  const GnssCaseModels& models);

/// Fuses observation likelihoods with the prior. kSum normalizes the sum of the
/// likelihoods, kProduct multiplies them; either result is multiplied into the
/// prior and normalized. An empty list returns the prior.
LikelihoodField combine(const LikelihoodField& prior, std::span<const CellLikelihood> likelihoods,
                        CombineMode mode = CombineMode::kSum);

LikelihoodField update_range(const LikelihoodField& prior, const RangeObservation& obs,
                             const AnchorMap& anchors, const NoiseModel& model,
                             CombineMode mode = CombineMode::kSum);
LikelihoodField update_tdoa(const LikelihoodField& prior, const RangeDifferenceObservation& obs,
                            const AnchorMap& anchors, const NoiseModel& model,
                            CombineMode mode = CombineMode::kSum);
LikelihoodField update_aoa(const LikelihoodField& prior, const AngleObservation& obs,
                           const AnchorMap& anchors, const NoiseModel& model,
                           CombineMode mode = CombineMode::kSum);

struct GnssUpdate {
  LikelihoodField posterior;
  bool updated = false;  // false: fewer than two satellites or no usable pair
  int pairs_used = 0;
};

GnssUpdate update_gnss_bssd(const LikelihoodField& prior, const GnssPseudoranges& obs,
                            const GnssCaseModels& models, CombineMode mode = CombineMode::kSum);

}  // namespace gridfuse
