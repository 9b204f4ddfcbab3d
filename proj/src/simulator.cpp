#include "gridfuse/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "gridfuse/geometry.hpp"

namespace gridfuse {

namespace {

constexpr double kEarthRadius = 6'371'000.0;  // m
constexpr double kOrbitAltitude = 20'200'000.0;
constexpr double kDeg = kPi / 180.0;

std::vector<double> sensor_times(double start, double end, double hz, double offset) {
  std::vector<double> out;
  for (long k = 0;; ++k) {
    const double t = start + offset + static_cast<double>(k) / hz;
    if (t > end + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

}  // namespace

Visibility SatelliteTrack::visibility(double t) const {
  for (const auto& [start, end] : nlos_intervals) {
    if (t >= start && t < end) return Visibility::kNlos;
  }
  return Visibility::kLos;
}

void Scenario::validate() const {
  grid.validate();
  if (trajectory.size() < 2) throw InvalidArgument("trajectory needs at least two poses");
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (!(trajectory[i].t > trajectory[i - 1].t)) {
      throw InvalidArgument("trajectory timestamps must be strictly increasing");
    }
  }
  if (!(rates.gnss_hz > 0.0) || !(rates.uwb_hz > 0.0) || !(rates.odometry_hz > 0.0)) {
    throw InvalidArgument("sensor rates must be positive");
  }
  if (!(noise.uwb_outlier_rate >= 0.0 && noise.uwb_outlier_rate <= 1.0)) {
    throw InvalidArgument("outlier rate must lie in [0, 1]");
  }
  if (noise.uwb.stddev < 0.0 || noise.gnss_sigma < 0.0 || noise.nlos_bias_mean < 0.0 ||
      noise.tdoa_sigma < 0.0 || noise.aoa_sigma < 0.0 || noise.receiver_clock_sigma < 0.0 ||
      noise.odometry_speed_sigma < 0.0 || noise.odometry_heading_sigma < 0.0) {
    throw InvalidArgument("noise magnitudes must be non-negative");
  }
  if ((emit_ranges || emit_tdoa || emit_aoa) && anchors.empty()) {
    throw InvalidArgument("terrestrial observations need anchors");
  }
  if (emit_tdoa && anchors.size() < 2) throw InvalidArgument("tdoa needs two anchors");
}

VisibilityOracle Scenario::visibility_oracle() const {
  auto tracks = satellites;
  return [tracks](const std::string& sat_id, double epoch) {
    for (const auto& s : tracks) {
      if (s.id == sat_id) return s.visibility(epoch);
    }
    return Visibility::kLos;
  };
}

AnchorMap Scenario::anchor_map() const {
  AnchorMap map;
  for (const auto& a : anchors) map.emplace(a.id, a);
  return map;
}

Pose Scenario::pose_at(double t) const {
  if (t <= trajectory.front().t) return trajectory.front();
  if (t >= trajectory.back().t) return trajectory.back();
  const auto it = std::upper_bound(trajectory.begin(), trajectory.end(), t,
                                   [](double value, const Pose& p) { return value < p.t; });
  const Pose& b = *it;
  const Pose& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  Pose out = a;
  out.t = t;
  out.position = a.position + u * (b.position - a.position);
  out.speed = a.speed + u * (b.speed - a.speed);
  return out;
}

SimulationOutput generate(const Scenario& scenario) {
  scenario.validate();
  const SimNoise& noise = scenario.noise;
  const double start = scenario.start_time();
  const double end = scenario.end_time();

  enum Kind { kGnss = 0, kUwb = 1, kOdo = 2 };
  std::vector<std::pair<double, Kind>> schedule;
  if (scenario.emit_gnss) {
    for (double t : sensor_times(start, end, scenario.rates.gnss_hz, 0.0)) schedule.emplace_back(t, kGnss);
  }
  if (scenario.emit_ranges || scenario.emit_tdoa || scenario.emit_aoa) {
    for (double t : sensor_times(start, end, scenario.rates.uwb_hz, scenario.rates.uwb_offset)) {
      schedule.emplace_back(t, kUwb);
    }
  }
  if (scenario.emit_odometry) {
    for (double t : sensor_times(start, end, scenario.rates.odometry_hz, scenario.rates.odometry_offset)) {
      schedule.emplace_back(t, kOdo);
    }
  }
  std::stable_sort(schedule.begin(), schedule.end());

  Rng rng(scenario.seed);
  auto gauss = [&rng](double mean, double sigma) {
    return sigma > 0.0 ? std::normal_distribution<double>(mean, sigma)(rng) : mean;
  };

  SimulationOutput out;
  for (const auto& [t, kind] : schedule) {
    const Pose pose = scenario.pose_at(t);
    if (kind == kGnss) {
      const double clock = kSpeedOfLight * gauss(0.0, noise.receiver_clock_sigma);
      GnssPseudoranges epoch;
      for (const auto& sat : scenario.satellites) {
        const Visibility vis = sat.visibility(t);
        double rho = norm(sat.position - pose.position) + clock + gauss(0.0, noise.gnss_sigma);
        if (vis == Visibility::kNlos && noise.nlos_bias_mean > 0.0) {
          rho += std::exponential_distribution<double>(1.0 / noise.nlos_bias_mean)(rng);
        }
        epoch.satellites.push_back({sat.id, sat.position, rho, vis});
      }
      out.observations.push_back({t, std::move(epoch)});
    } else if (kind == kUwb) {
      auto range_error = [&]() {
        if (std::bernoulli_distribution(noise.uwb_outlier_rate)(rng)) {
          return sample(NoiseModel{noise.uwb_outlier}, rng);
        }
        return gauss(noise.uwb.mean, noise.uwb.stddev);
      };
      if (scenario.emit_ranges) {
        for (const auto& a : scenario.anchors) {
          const double range = norm(a.position - pose.position) + range_error();
          out.observations.push_back({t, RangeObservation{a.id, range}});
        }
      }
      if (scenario.emit_tdoa) {
        const auto& ref = scenario.anchors.front();
        for (std::size_t i = 1; i < scenario.anchors.size(); ++i) {
          const auto& a = scenario.anchors[i];
          const double diff = norm(a.position - pose.position) - norm(ref.position - pose.position) +
                              gauss(0.0, noise.tdoa_sigma);
          out.observations.push_back({t, RangeDifferenceObservation{a.id, ref.id, diff}});
        }
      }
      if (scenario.emit_aoa) {
        for (const auto& a : scenario.anchors) {
          const double bearing = std::atan2(a.position.y - pose.position.y, a.position.x - pose.position.x);
          out.observations.push_back({t, AngleObservation{a.id, wrap_angle(bearing + gauss(0.0, noise.aoa_sigma))}});
        }
      }
    } else {
      OdometryObservation odo;
      odo.speed = std::max(0.0, pose.speed + gauss(0.0, noise.odometry_speed_sigma));
      const double heading = wrap_angle(pose.heading + gauss(0.0, noise.odometry_heading_sigma));
      if (pose.speed >= noise.heading_min_speed) odo.heading = heading;
      out.observations.push_back({t, odo});
    }
    if (kind != kOdo && (out.truth.empty() || out.truth.back().t != t)) {
      out.truth.push_back({t, pose.position});
    }
  }
  return out;
}

std::vector<SatelliteTrack> default_constellation() {
  struct Dir {
    const char* id;
    double azimuth_deg;
    double elevation_deg;
  };
  static constexpr Dir dirs[] = {{"G02", 10, 15},  {"G05", 55, 75},  {"G07", 100, 35},
                                 {"G13", 145, 55}, {"E04", 190, 25}, {"E11", 235, 65},
                                 {"R08", 280, 45}, {"R17", 325, 20}};
  std::vector<SatelliteTrack> out;
  for (const auto& d : dirs) {
    const double el = d.elevation_deg * kDeg;
    const double az = d.azimuth_deg * kDeg;
    const double orbit = kEarthRadius + kOrbitAltitude;
    // Slant range from a receiver on a spherical earth.
    const double range = std::sqrt(orbit * orbit - std::pow(kEarthRadius * std::cos(el), 2)) -
                         kEarthRadius * std::sin(el);
    // East = +x, north = +y, azimuth clockwise from north.
    out.push_back({d.id,
                   {range * std::cos(el) * std::sin(az), range * std::cos(el) * std::cos(az),
                    range * std::sin(el)},
                   {}});
  }
  return out;
}

std::vector<ReferencePoint> default_anchors() {
  const std::vector<std::pair<std::string, Vec3>> layout = {
      {"A01", {-30.0, -20.0, 3.0}}, {"A02", {0.0, -22.0, 2.5}},  {"A03", {30.0, -20.0, 3.2}},
      {"A04", {32.0, 0.0, 2.8}},    {"A05", {30.0, 20.0, 3.0}},  {"A06", {0.0, 22.0, 2.6}},
      {"A07", {-30.0, 20.0, 3.1}},  {"A08", {-32.0, 0.0, 2.7}},  {"A09", {-12.0, 6.0, 4.0}},
      {"A10", {14.0, -7.0, 3.5}},   {"A11", {5.0, 12.0, 3.8}}};
  std::vector<ReferencePoint> out;
  for (const auto& [id, p] : layout) out.push_back({id, p, ReferenceKind::kAnchor});
  return out;
}

Scenario make_static_scenario(const StaticScenarioConfig& config) {
  if (config.epochs < 1) throw InvalidArgument("static scenario needs at least one epoch");
  const int cells = static_cast<int>(std::lround(config.grid_size / config.cell_size));
  Scenario s;
  s.grid = GridSpec::planar({-0.5 * cells * config.cell_size, -0.5 * cells * config.cell_size,
                             config.position.z},
                            config.cell_size, cells, cells);
  s.anchors = default_anchors();
  s.satellites = default_constellation();
  const double end = static_cast<double>(config.epochs) - 0.5;
  for (auto& sat : s.satellites) {
    if (std::find(config.nlos_satellites.begin(), config.nlos_satellites.end(), sat.id) !=
        config.nlos_satellites.end()) {
      sat.nlos_intervals.emplace_back(0.0, end + 1.0);
    }
  }
  s.trajectory = {{0.0, config.position, 0.0, 0.0}, {end, config.position, 0.0, 0.0}};
  s.rates = {1.0, 1.0, 1.0, 0.0, 0.0};
  s.noise = config.noise;
  s.seed = config.seed;
  return s;
}

Scenario make_dynamic_scenario(const DynamicScenarioConfig& config) {
  if (!(config.duration > 0.0) || !(config.speed >= 0.0) || !(config.turn_radius > 0.0) ||
      !(config.straight >= 0.0)) {
    throw InvalidArgument("invalid dynamic scenario geometry");
  }
  Scenario s;
  const int nx = static_cast<int>(std::lround(config.grid_width / config.cell_size));
  const int ny = static_cast<int>(std::lround(config.grid_height / config.cell_size));
  s.grid = GridSpec::planar({-0.5 * nx * config.cell_size, -0.5 * ny * config.cell_size,
                             config.antenna_height},
                            config.cell_size, nx, ny);
  s.anchors = default_anchors();
  s.satellites = default_constellation();
  s.rates = config.rates;
  s.noise = config.noise;
  s.seed = config.seed;

  // Stadium course: bottom straight eastwards, right turn, top straight westwards, left turn.
  const double half = 0.5 * config.straight;
  const double r = config.turn_radius;
  const double arc = kPi * r;
  const double perimeter = 2.0 * config.straight + 2.0 * arc;
  auto pose_on_course = [&](double t) {
    const double dist = std::fmod(config.speed * t, perimeter);
    Pose p;
    p.t = t;
    p.speed = config.speed;
    double x, y, heading;
    if (dist < config.straight) {
      x = -half + dist;
      y = -r;
      heading = 0.0;
    } else if (dist < config.straight + arc) {
      const double phi = -0.5 * kPi + (dist - config.straight) / r;
      x = half + r * std::cos(phi);
      y = r * std::sin(phi);
      heading = phi + 0.5 * kPi;
    } else if (dist < 2.0 * config.straight + arc) {
      x = half - (dist - config.straight - arc);
      y = r;
      heading = kPi;
    } else {
      const double phi = 0.5 * kPi + (dist - 2.0 * config.straight - arc) / r;
      x = -half + r * std::cos(phi);
      y = r * std::sin(phi);
      heading = phi + 0.5 * kPi;
    }
    p.position = {x, y, config.antenna_height};
    p.heading = wrap_angle(heading);
    return p;
  };
  constexpr double kSampleStep = 0.05;
  const long samples = static_cast<long>(std::ceil(config.duration / kSampleStep));
  for (long k = 0; k <= samples; ++k) {
    s.trajectory.push_back(pose_on_course(std::min(config.duration, k * kSampleStep)));
  }
  if (s.trajectory.size() >= 2 && !(s.trajectory.back().t > s.trajectory[s.trajectory.size() - 2].t)) {
    s.trajectory.pop_back();
  }

  // Alternating LOS/NLOS spells per satellite from an independent stream.
  Rng sky(config.seed ^ 0x5eed5eedULL);
  for (auto& sat : s.satellites) {
    bool nlos = std::bernoulli_distribution(config.nlos_spell / (config.los_spell + config.nlos_spell))(sky);
    double t = 0.0;
    while (t < config.duration) {
      const double mean = nlos ? config.nlos_spell : config.los_spell;
      const double length = std::exponential_distribution<double>(1.0 / mean)(sky);
      if (nlos) sat.nlos_intervals.emplace_back(t, t + length);
      t += length;
      nlos = !nlos;
    }
  }
  return s;
}

std::vector<double> bssd_residuals(const Scenario& scenario, const SimulationOutput& output,
                                   bool los_only) {
  std::vector<double> out;
  for (const auto& obs : output.observations) {
    const auto* gnss = std::get_if<GnssPseudoranges>(&obs.payload);
    if (!gnss) continue;
    const Vec3 truth = scenario.pose_at(obs.timestamp).position;
    const auto& sats = gnss->satellites;
    for (std::size_t a = 0; a < sats.size(); ++a) {
      for (std::size_t b = 0; b < sats.size(); ++b) {
        if (a == b) continue;
        if (los_only && (sats[a].visibility != Visibility::kLos || sats[b].visibility != Visibility::kLos)) {
          continue;
        }
        const double geometric = norm(sats[a].position - truth) - norm(sats[b].position - truth);
        out.push_back(sats[a].pseudorange - sats[b].pseudorange - geometric);
      }
    }
  }
  return out;
}

std::vector<double> range_residuals(const Scenario& scenario, const SimulationOutput& output) {
  const AnchorMap anchors = scenario.anchor_map();
  std::vector<double> out;
  for (const auto& obs : output.observations) {
    const auto* range = std::get_if<RangeObservation>(&obs.payload);
    if (!range) continue;
    const Vec3 truth = scenario.pose_at(obs.timestamp).position;
    out.push_back(range->range - norm(find_anchor(anchors, range->anchor_id).position - truth));
  }
  return out;
}

}  // namespace gridfuse
