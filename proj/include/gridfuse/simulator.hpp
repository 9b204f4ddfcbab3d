#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridfuse/measurement_update.hpp"
#include "gridfuse/noise_models.hpp"
#include "gridfuse/state_grid.hpp"

namespace gridfuse {

struct Pose {
  double t = 0.0;
  Vec3 position;
  double speed = 0.0;    // m/s
  double heading = 0.0;  // rad, counter-clockwise from +x
};

struct SatelliteTrack {
  std::string id;
  Vec3 position;
  /// Half-open [start, end) intervals during which the satellite is NLOS.
  std::vector<std::pair<double, double>> nlos_intervals;

  Visibility visibility(double t) const;
};

struct SensorRates {
  double gnss_hz = 1.0;
  double uwb_hz = 1.0;
  double odometry_hz = 1.0;
  double uwb_offset = 0.0;       // s, first UWB epoch
  double odometry_offset = 0.0;  // s, first odometry sample
};

struct SimNoise {
  GaussianModel uwb{0.05, 0.31};
  double uwb_outlier_rate = 0.1;
  UniformModel uwb_outlier{-30.0, 30.0};
  double tdoa_sigma = 0.3;            // m, added to each range difference
  double aoa_sigma = 0.05;            // rad
  double gnss_sigma = 7.8;            // m, per pseudorange
  double nlos_bias_mean = 13.0;       // m, exponential NLOS excess delay
  double receiver_clock_sigma = 1e-7; // s, common clock offset per epoch
  double odometry_speed_sigma = 0.05; // m/s
  double odometry_heading_sigma = 0.02;
  /// Heading is reported only above this speed.
  double heading_min_speed = 0.5;     // m/s
};

struct Scenario {
  GridSpec grid;
  std::vector<ReferencePoint> anchors;
  std::vector<SatelliteTrack> satellites;
  /// Strictly increasing sample times; positions are interpolated between samples.
  std::vector<Pose> trajectory;
  SensorRates rates;
  SimNoise noise;
  bool emit_gnss = true;
  bool emit_ranges = true;
  bool emit_tdoa = false;  // differences against the first anchor
  bool emit_aoa = false;
  bool emit_odometry = true;
  std::uint64_t seed = 42;

  double start_time() const { return trajectory.front().t; }
  double end_time() const { return trajectory.back().t; }
  void validate() const;
  VisibilityOracle visibility_oracle() const;
  AnchorMap anchor_map() const;
  Pose pose_at(double t) const;
};

struct GroundTruthSample {
  double t = 0.0;
  Vec3 position;
};

struct SimulationOutput {
  std::vector<Observation> observations;
  std::vector<GroundTruthSample> truth;  // one row per GNSS/UWB epoch
};

/// Deterministic for a fixed scenario and seed.
SimulationOutput generate(const Scenario& scenario);

/// Eight satellites in fixed directions at GNSS orbit altitude, elevations 15-75 degrees.
std::vector<SatelliteTrack> default_constellation();

/// Eleven anchors around a 60 m x 40 m test area centred on the origin.
std::vector<ReferencePoint> default_anchors();

struct StaticScenarioConfig {
  std::uint64_t seed = 42;
  int epochs = 500;
  double cell_size = 0.2;
  double grid_size = 40.0;  // m, square grid centred on the area
  Vec3 position{3.3, -2.1, 1.5};
  /// Satellites permanently NLOS at the static point.
  std::vector<std::string> nlos_satellites{"G07", "E11"};
  SimNoise noise;
};

struct DynamicScenarioConfig {
  std::uint64_t seed = 42;
  double duration = 300.0;  // s
  double speed = 5.0;       // m/s
  double straight = 30.0;   // m, stadium straight length
  double turn_radius = 10.0;
  double antenna_height = 1.5;
  double cell_size = 0.2;
  double grid_width = 64.0;
  double grid_height = 44.0;
  /// GNSS and UWB epoch rates in the 1411:655 proportion of the field run.
  SensorRates rates{1.0, 655.0 / 1411.0, 2.0, 0.5, 0.25};
  /// Mean duration of LOS and NLOS spells per satellite.
  double los_spell = 60.0;
  double nlos_spell = 20.0;
  SimNoise noise;
};

Scenario make_static_scenario(const StaticScenarioConfig& config);
Scenario make_dynamic_scenario(const DynamicScenarioConfig& config);

/// Full-set single-difference residuals Delta rho - (d_a - d_b) at the true
/// position for every ordered pair, optionally restricted to LOS-LOS pairs.
std::vector<double> bssd_residuals(const Scenario& scenario, const SimulationOutput& output,
                                   bool los_only);

/// Range residuals (measured minus true range) of every simulated UWB range.
std::vector<double> range_residuals(const Scenario& scenario, const SimulationOutput& output);

}  // namespace gridfuse
