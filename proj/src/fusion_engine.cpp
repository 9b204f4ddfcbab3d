#include "gridfuse/fusion_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace gridfuse {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool is_measurement(SensorKind s) { return s == SensorKind::kGnss || s == SensorKind::kUwb; }

}  // namespace

SensorKind sensor_of(const Payload& payload) {
  return std::visit(Overloaded{
                        [](const GnssPseudoranges&) { return SensorKind::kGnss; },
                        [](const OdometryObservation&) { return SensorKind::kOdometry; },
                        [](const auto&) { return SensorKind::kUwb; },
                    },
                    payload);
}

void sort_events(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    return static_cast<int>(a.sensor) < static_cast<int>(b.sensor);
  });
}

std::vector<Event> group_observations(std::vector<Observation> observations) {
  std::stable_sort(observations.begin(), observations.end(),
                   [](const Observation& a, const Observation& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return static_cast<int>(sensor_of(a.payload)) <
                            static_cast<int>(sensor_of(b.payload));
                   });
  std::vector<Event> events;
  for (auto& obs : observations) {
    const SensorKind sensor = sensor_of(obs.payload);
    const bool joinable = !events.empty() && events.back().timestamp == obs.timestamp &&
                          events.back().sensor == sensor && sensor != SensorKind::kOdometry;
    if (!joinable) {
      events.push_back({obs.timestamp, sensor, {}});
    }
    auto& payloads = events.back().payloads;
    if (sensor == SensorKind::kGnss && !payloads.empty()) {
      auto& merged = std::get<GnssPseudoranges>(payloads.front()).satellites;
      const auto& extra = std::get<GnssPseudoranges>(obs.payload).satellites;
      merged.insert(merged.end(), extra.begin(), extra.end());
    } else {
      payloads.push_back(std::move(obs.payload));
    }
  }
  return events;
}

void FilterConfig::validate() const {
  grid.validate();
  ::gridfuse::validate(range_model);
  ::gridfuse::validate(tdoa_model);
  ::gridfuse::validate(aoa_model);
  ::gridfuse::validate(gnss_models.los_los);
  ::gridfuse::validate(gnss_models.nlos_los);
  ::gridfuse::validate(gnss_models.los_nlos);
  if (!(sigma_speed > 0.0) || !(sigma_heading > 0.0)) {
    throw InvalidArgument("motion standard deviations must be positive");
  }
  if (!(max_gap > 0.0)) throw InvalidArgument("max_gap must be positive");
  if (!(recenter_margin >= 0.0 && recenter_margin < 0.5)) {
    throw InvalidArgument("recenter_margin must lie in [0, 0.5)");
  }
  if (effective_radius() < grid.cell_size) {
    throw InvalidArgument("weighted-mean radius must be at least one cell");
  }
}

GmmModel default_bssd_gmm() {
  return make_gmm({{0.42, 0.25, 13.06}, {0.24, 13.09, 20.37}, {0.24, -12.61, 21.05},
                   {0.01, -0.3, 142.89}},
                  true);
}

NoiseModel default_uwb_model(double ratio) {
  return make_mixture(ratio, GaussianModel{0.05, 0.31}, UniformModel{-30.0, 30.0});
}

FilterConfig default_filter_config(const GridSpec& grid, const AnchorMap& anchors) {
  FilterConfig config;
  config.grid = grid;
  config.anchors = anchors;
  config.range_model = default_uwb_model(0.9);
  config.gnss_models = GnssCaseModels::from_gmm(default_bssd_gmm());
  return config;
}

FusionEngine::FusionEngine(FilterConfig config) : config_(std::move(config)) { config_.validate(); }

FilterState FusionEngine::initial_state() const {
  return {init_uniform(config_.grid), std::nullopt, std::nullopt, {}};
}

Admission FusionEngine::admit(const Event& event, const FilterState& state) const {
  if (!std::isfinite(event.timestamp)) return {false, RejectReason::kNonFinite, false};
  if (event.payloads.empty()) return {false, RejectReason::kEmpty, false};
  if (state.last_timestamp && event.timestamp < *state.last_timestamp) {
    return {false, RejectReason::kOutOfSequence, false};
  }
  const bool gap = state.last_timestamp && event.timestamp - *state.last_timestamp > config_.max_gap;
  return {true, RejectReason::kNone, gap};
}

const TransitionWorkspace& FusionEngine::workspace(double radius) const {
  if (!workspace_ || workspace_->max_radius() < radius) {
    workspace_ = std::make_shared<const TransitionWorkspace>(config_.grid, radius * 1.5);
  }
  return *workspace_;
}

std::vector<CellLikelihood> FusionEngine::likelihoods(const GridSpec& grid, const Event& event) const {
  std::vector<CellLikelihood> out;
  for (const auto& payload : event.payloads) {
    std::visit(Overloaded{
                   [&](const RangeObservation& o) {
                     out.push_back(range_likelihood(grid, o, find_anchor(config_.anchors, o.anchor_id),
                                                    config_.range_model));
                   },
                   [&](const RangeDifferenceObservation& o) {
                     out.push_back(tdoa_likelihood(grid, o, find_anchor(config_.anchors, o.ref_a_id),
                                                   find_anchor(config_.anchors, o.ref_b_id),
                                                   config_.tdoa_model));
                   },
                   [&](const AngleObservation& o) {
                     out.push_back(aoa_likelihood(grid, o, find_anchor(config_.anchors, o.anchor_id),
                                                  config_.aoa_model));
                   },
                   [&](const GnssPseudoranges& o) {
                     auto pairs = gnss_pair_likelihoods(grid, o, config_.gnss_models);
                     if (pairs.empty()) {
                       spdlog::debug("t={:.3f}: GNSS epoch without usable pairs", event.timestamp);
                     }
                     for (auto& p : pairs) out.push_back(std::move(p));
                   },
                   [&](const OdometryObservation&) {},
               },
               payload);
  }
  return out;
}

StepOutcome FusionEngine::step(FilterState state, const Event& event) const {
  StepReport report;
  if (state.last_timestamp) report.dt = event.timestamp - *state.last_timestamp;
  if (report.dt < 0.0) throw InvalidArgument("step received an out-of-sequence event");

  if (report.dt > 0.0) {
    if (report.dt > config_.max_gap && config_.reinit_on_gap) {
      spdlog::info("t={:.3f}: {:.1f} s gap, reinitializing field", event.timestamp, report.dt);
      state.field = init_uniform(state.field.spec());
      report.reinitialized = true;
    } else {
      std::optional<MotionInput> motion = state.motion;
      double radius;
      if (motion) {
        motion->dt = report.dt;
        radius = truncation_radius(*motion, config_.grid.cell_size);
      } else {
        radius = 6.0 * config_.prediction.random_walk_sigma * report.dt + 6.0 * config_.grid.cell_size;
      }
      state.field = predict(state.field, motion, workspace(radius), config_.prediction, report.dt);
      report.predicted = true;
    }
  }
  state.last_timestamp = event.timestamp;

  for (const auto& payload : event.payloads) {
    if (const auto* odo = std::get_if<OdometryObservation>(&payload)) {
      MotionInput motion;
      motion.speed = odo->speed;
      motion.heading = odo->heading;
      motion.sigma_speed = config_.sigma_speed;
      motion.sigma_heading = config_.sigma_heading;
      motion.validate();
      state.motion = motion;
    }
  }

  const auto liks = likelihoods(state.field.spec(), event);
  if (!liks.empty()) {
    try {
      state.field = combine(state.field, liks, config_.combine);
    } catch (const DegenerateField&) {
      spdlog::warn("t={:.3f}: degenerate posterior, reinitializing field", event.timestamp);
      report.degenerate = true;
      report.reinitialized = true;
      state.field = init_uniform(state.field.spec());
      try {
        state.field = combine(state.field, liks, config_.combine);
      } catch (const DegenerateField&) {
        spdlog::warn("t={:.3f}: observation carries no information, keeping uniform field",
                     event.timestamp);
      }
    }
    report.measurement_update = true;
  }

  std::optional<Estimate> est;
  if (report.measurement_update && is_measurement(event.sensor)) {
    est = estimate(state.field, config_.effective_radius(), event.timestamp);
    state.history.push_back(*est);

    if (config_.recenter) {
      const GridSpec& g = state.field.spec();
      const auto c = g.coords(est->map_cell);
      CellCoords shift{0, 0, 0};
      bool near_border = false;
      for (int axis = 0; axis < g.dimensionality; ++axis) {
        const int margin = static_cast<int>(std::ceil(config_.recenter_margin * g.extent[axis]));
        if (c[axis] < margin || c[axis] > g.extent[axis] - 1 - margin) near_border = true;
        shift[axis] = c[axis] - g.extent[axis] / 2;
      }
      if (near_border) {
        state.field = recenter(state.field, g.position(shift), config_.recenter_floor);
        report.recentered = true;
        spdlog::debug("t={:.3f}: grid recentered", event.timestamp);
      }
    }
  }
  return {std::move(state), est, report};
}

RunResult FusionEngine::run(std::vector<Event> events, const RunOptions& options) const {
  RunResult result{{}, 0, 0, {}, 0, 0, {}, init_uniform(config_.grid)};
  double latest = -std::numeric_limits<double>::infinity();
  for (const auto& e : events) {
    if (e.timestamp < latest) ++result.inversions;
    latest = std::max(latest, e.timestamp);
  }
  if (options.sort) sort_events(events);

  FilterState state = initial_state();
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Admission admission = admit(events[i], state);
    if (!admission.accepted) {
      spdlog::debug("event {} at t={:.3f} rejected", i, events[i].timestamp);
      result.rejected.emplace_back(i, admission.reason);
      continue;
    }
    StepOutcome outcome = step(std::move(state), events[i]);
    state = std::move(outcome.state);
    ++result.processed;
    result.processed_timestamps.push_back(events[i].timestamp);
    if (outcome.report.reinitialized) ++result.reinitializations;
    if (outcome.report.recentered) ++result.recenters;
    if (outcome.estimate) {
      // One estimate per epoch: a later sensor at the same timestamp supersedes it.
      if (!result.estimates.empty() && result.estimates.back().timestamp == outcome.estimate->timestamp) {
        result.estimates.back() = *outcome.estimate;
      } else {
        result.estimates.push_back(*outcome.estimate);
      }
    }
  }
  if (result.inversions > 0) {
    spdlog::info("{} events arrived out of sequence ({})", result.inversions,
                 options.sort ? "reordered" : "rejected");
  }
  result.final_field = std::move(state.field);
  return result;
}

}  // namespace gridfuse
