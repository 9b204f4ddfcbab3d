#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gridfuse/fusion_engine.hpp"
#include "gridfuse/metrics.hpp"
#include "gridfuse/simulator.hpp"

namespace gridfuse {

/// Malformed file or configuration content.
class DataError : public Error {
 public:
  using Error::Error;
};

inline constexpr const char* kScenarioSchema = "gridfuse.scenario/1";
inline constexpr const char* kFilterSchema = "gridfuse.filter/1";

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Observation CSV: `t,sensor,type,ref_ids,values...`. GNSS epochs use one row
/// per satellite (`ref_ids` = satellite id, values = x,y,z,pseudorange,LOS|NLOS);
/// tdoa rows list both anchors as `a;b`; odometry heading may be empty.
void write_observations(std::ostream& out, std::span<const Observation> observations);
/// Consecutive GNSS rows sharing a timestamp become one epoch.
std::vector<Observation> read_observations(std::istream& in);

void write_truth(std::ostream& out, std::span<const GroundTruthSample> truth);
std::vector<GroundTruthSample> read_truth(std::istream& in);

void write_estimates(std::ostream& out, std::span<const Estimate> estimates);
std::vector<Estimate> read_estimates(std::istream& in);

void write_stats(std::ostream& out, std::span<const std::pair<std::string, StatsSummary>> rows);
void write_ecdf(std::ostream& out, std::span<const std::pair<double, double>> steps);

void write_residuals(std::ostream& out, std::span<const double> residuals);
std::vector<double> read_residuals(std::istream& in);

void write_gmm(std::ostream& out, const GmmModel& model);
GmmModel read_gmm(std::istream& in);

struct ScenarioConfig {
  std::string kind = "static";  // static | dynamic
  StaticScenarioConfig static_config;
  DynamicScenarioConfig dynamic_config;
  bool emit_gnss = true;
  bool emit_ranges = true;
  bool emit_tdoa = false;
  bool emit_aoa = false;
  bool emit_odometry = true;

  std::uint64_t seed() const;
  void set_seed(std::uint64_t seed);
  void set_cell_size(double cell_size);
};

ScenarioConfig parse_scenario_config(const std::string& json_text);
std::string scenario_config_json(const ScenarioConfig& config);
Scenario build_scenario(const ScenarioConfig& config);

/// Missing fields fall back to default_filter_config for the given grid and anchors.
FilterConfig parse_filter_config(const std::string& json_text);
std::string filter_config_json(const FilterConfig& config);

/// Same area covered with a different cell size.
GridSpec regrid(const GridSpec& grid, double cell_size);

}  // namespace gridfuse
