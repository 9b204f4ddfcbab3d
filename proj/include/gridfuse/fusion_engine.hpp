#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "gridfuse/estimation.hpp"
#include "gridfuse/measurement_update.hpp"
#include "gridfuse/prediction.hpp"

namespace gridfuse {

/// Sensor classes in their tie-break order for equal timestamps.
enum class SensorKind { kGnss = 0, kUwb = 1, kOdometry = 2 };

SensorKind sensor_of(const Payload& payload);

/// All observations one sensor delivered at one timestamp.
struct Event {
  double timestamp = 0.0;
  SensorKind sensor = SensorKind::kUwb;
  std::vector<Payload> payloads;
};

/// Groups time-stamped observations into per-sensor epochs ordered by
/// (timestamp, sensor). GNSS pseudoranges sharing a timestamp are merged into
/// one satellite list; odometry samples stay separate events.
std::vector<Event> group_observations(std::vector<Observation> observations);

/// Stable sort by timestamp, then GNSS before UWB before odometry.
void sort_events(std::vector<Event>& events);

struct FilterConfig {
  GridSpec grid;
  AnchorMap anchors;
  CombineMode combine = CombineMode::kSum;
  NoiseModel range_model = GaussianModel{0.0, 0.3};
  NoiseModel tdoa_model = GaussianModel{0.0, 0.45};
  NoiseModel aoa_model = GaussianModel{0.0, 0.05};
  GnssCaseModels gnss_models = GnssCaseModels::gaussian(7.8);
  double sigma_speed = 0.5;    // m/s
  double sigma_heading = 0.2;  // rad
  /// Pruning keeps long runs tractable; dropped terms sit below 1e-12 of the peak.
  PredictionOptions prediction{PredictionVariant::kSourceWeighted, 1e-12, 1e-12, true, 0.5};
  /// Weighted-mean radius; non-positive selects 5 cells.
  double wm_radius = 0.0;
  /// Gap between events beyond which the field is reinitialized.
  double max_gap = 10.0;
  bool reinit_on_gap = true;
  bool recenter = true;
  /// Fraction of the extent next to each border that triggers recentering.
  double recenter_margin = 0.1;
  double recenter_floor = kMassFloor;

  double effective_radius() const { return wm_radius > 0.0 ? wm_radius : 5.0 * grid.cell_size; }
  void validate() const;
};

/// UWB mixture N(0.05, 0.31^2) at phi = 0.9 with a uniform [-30, 30] m outlier
/// channel, GNSS BSSD routed through the calibrated residual GMM.
FilterConfig default_filter_config(const GridSpec& grid, const AnchorMap& anchors);

/// The four-component BSSD residual GMM, weights rescaled to sum to one.
GmmModel default_bssd_gmm();

/// UWB ranging likelihood: phi * N(0.05, 0.31^2) + (1 - phi) * U(-30, 30).
NoiseModel default_uwb_model(double ratio = 0.9);

struct FilterState {
  LikelihoodField field;
  std::optional<double> last_timestamp;
  std::optional<MotionInput> motion;  // held until the next odometry event
  std::vector<Estimate> history;
};

enum class RejectReason { kNone, kOutOfSequence, kNonFinite, kEmpty };

struct Admission {
  bool accepted = true;
  RejectReason reason = RejectReason::kNone;
  bool reinit_recommended = false;
};

struct StepReport {
  double dt = 0.0;
  bool predicted = false;
  bool measurement_update = false;
  bool reinitialized = false;     // gap or degenerate field
  bool degenerate = false;
  bool recentered = false;
};

struct StepOutcome {
  FilterState state;
  std::optional<Estimate> estimate;
  StepReport report;
};

struct RunOptions {
  /// Sort events before processing; otherwise events are admitted in arrival order.
  bool sort = true;
};

struct RunResult {
  /// Last estimate of each measurement timestamp.
  std::vector<Estimate> estimates;
  std::size_t processed = 0;
  /// Arrival-order events older than an earlier arrival.
  std::size_t inversions = 0;
  std::vector<std::pair<std::size_t, RejectReason>> rejected;
  std::size_t reinitializations = 0;
  std::size_t recenters = 0;
  std::vector<double> processed_timestamps;
  LikelihoodField final_field;
};

class FusionEngine {
 public:
  explicit FusionEngine(FilterConfig config);

  const FilterConfig& config() const { return config_; }
  FilterState initial_state() const;

  Admission admit(const Event& event, const FilterState& state) const;

  /// Predicts over the gap to the event, applies its measurements and emits an
  /// estimate for GNSS and UWB events. The event must have been admitted.
  StepOutcome step(FilterState state, const Event& event) const;

  RunResult run(std::vector<Event> events, const RunOptions& options = {}) const;

 private:
  const TransitionWorkspace& workspace(double radius) const;
  std::vector<CellLikelihood> likelihoods(const GridSpec& grid, const Event& event) const;

  FilterConfig config_;
  mutable std::shared_ptr<const TransitionWorkspace> workspace_;
};

}  // namespace gridfuse
