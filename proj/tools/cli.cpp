#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gridfuse/io.hpp"

namespace gridfuse {

namespace {

namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<double> grid_res;
  std::optional<std::string> combine;
  std::optional<double> radius;
  std::string kind = "static";
  std::string observations;
  std::string estimates;
  std::string truth;
  std::string residuals;
  std::string label = "run";
  int components = 4;
  bool arrival_order = false;
  int epochs = 500;
  double duration = 300.0;
};

void setup_logging() {
  auto logger = spdlog::get("gridfuse");
  if (!logger) logger = spdlog::stderr_color_mt("gridfuse");
  spdlog::set_default_logger(logger);
  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("GRIDFUSE_LOG")) level = spdlog::level::from_str(env);
  spdlog::set_level(level);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  writer(out);
  out.flush();
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

CombineMode parse_combine(const std::string& mode) {
  if (mode == "sum") return CombineMode::kSum;
  if (mode == "product") return CombineMode::kProduct;
  throw DataError("combine must be 'sum' or 'product'");
}

void apply_filter_overrides(FilterConfig& config, const Options& o) {
  if (o.grid_res) config.grid = regrid(config.grid, *o.grid_res);
  if (o.combine) config.combine = parse_combine(*o.combine);
  if (o.radius) config.wm_radius = *o.radius;
  try {
    config.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid filter settings: ") + e.what());
  }
}

struct SimulationFiles {
  Scenario scenario;
  SimulationOutput output;
};

SimulationFiles simulate(const ScenarioConfig& config, const fs::path& dir) {
  Scenario scenario = build_scenario(config);
  SimulationOutput output = generate(scenario);
  write_file(dir / "scenario.json", [&](std::ostream& o) { o << scenario_config_json(config); });
  write_file(dir / "observations.csv", [&](std::ostream& o) { write_observations(o, output.observations); });
  write_file(dir / "truth.csv", [&](std::ostream& o) { write_truth(o, output.truth); });
  const FilterConfig filter = default_filter_config(scenario.grid, scenario.anchor_map());
  write_file(dir / "filter.json", [&](std::ostream& o) { o << filter_config_json(filter); });
  const auto residuals = bssd_residuals(scenario, output, false);
  write_file(dir / "residuals.csv", [&](std::ostream& o) { write_residuals(o, residuals); });
  spdlog::info("simulated {} observations, {} truth samples into {}", output.observations.size(),
               output.truth.size(), dir.string());
  return {std::move(scenario), std::move(output)};
}

std::vector<Estimate> filter(const FilterConfig& config, std::vector<Observation> observations,
                             bool arrival_order, const fs::path& dir) {
  FusionEngine engine(config);
  RunOptions options;
  options.sort = !arrival_order;
  const RunResult result = engine.run(group_observations(std::move(observations)), options);
  write_file(dir / "estimates.csv", [&](std::ostream& o) { write_estimates(o, result.estimates); });
  spdlog::info("{} events processed, {} estimates, {} rejected, {} reinitializations, {} recenters",
               result.processed, result.estimates.size(), result.rejected.size(),
               result.reinitializations, result.recenters);
  return result.estimates;
}

StatsSummary evaluate(const std::vector<Estimate>& estimates, const std::vector<GroundTruthSample>& truth,
                      const std::string& label, const fs::path& dir) {
  const ErrorSeries series = error_series(estimates, truth);
  if (series.errors.empty()) throw DataError("no estimate matches a truth sample");
  const StatsSummary stats = summarize(series.errors);
  const std::pair<std::string, StatsSummary> row{label, stats};
  write_file(dir / "stats.csv", [&](std::ostream& o) { write_stats(o, {&row, 1}); });
  write_file(dir / "ecdf.csv", [&](std::ostream& o) { write_ecdf(o, ecdf(series.errors)); });
  std::cout << label << ": n=" << stats.count << " mean=" << format_double(stats.mean)
            << " m median=" << format_double(stats.median) << " m\n";
  return stats;
}

GmmModel calibrate(const std::vector<double>& residuals, int components, std::uint64_t seed,
                   const fs::path& dir) {
  if (components < 1) throw DataError("components must be positive");
  GmmFit fit;
  try {
    fit = fit_gmm(residuals, components, seed);
  } catch (const InvalidArgument& e) {
    throw DataError(e.what());
  }
  write_file(dir / "gmm.csv", [&](std::ostream& o) { write_gmm(o, fit.model); });
  std::cout << "fitted " << components << " components on " << residuals.size() << " residuals, "
            << fit.iterations << " iterations" << (fit.converged ? "" : " (not converged)") << '\n';
  for (const auto& c : fit.model.components) {
    std::cout << "  weight=" << format_double(c.weight) << " mean=" << format_double(c.mean)
              << " variance=" << format_double(c.variance) << '\n';
  }
  return fit.model;
}

int cmd_simulate(const Options& o) {
  ScenarioConfig config;
  if (!o.config.empty()) {
    config = parse_scenario_config(read_file(o.config));
  } else {
    config.kind = o.kind;
  }
  if (o.seed) config.set_seed(*o.seed);
  if (o.grid_res) config.set_cell_size(*o.grid_res);
  simulate(config, o.out);
  return 0;
}

int cmd_filter(const Options& o) {
  FilterConfig config = parse_filter_config(read_file(o.config));
  apply_filter_overrides(config, o);
  auto in = open_in(o.observations);
  filter(config, read_observations(in), o.arrival_order, o.out);
  return 0;
}

int cmd_evaluate(const Options& o) {
  auto est_in = open_in(o.estimates);
  auto truth_in = open_in(o.truth);
  evaluate(read_estimates(est_in), read_truth(truth_in), o.label, o.out);
  return 0;
}

int cmd_calibrate(const Options& o) {
  auto in = open_in(o.residuals);
  calibrate(read_residuals(in), o.components, o.seed.value_or(42), o.out);
  return 0;
}

int cmd_demo(const Options& o) {
  const fs::path root = o.out;
  std::vector<std::pair<std::string, StatsSummary>> rows;
  for (const std::string kind : {"static", "dynamic"}) {
    ScenarioConfig config;
    config.kind = kind;
    config.set_seed(o.seed.value_or(42));
    config.static_config.epochs = o.epochs;
    config.dynamic_config.duration = o.duration;
    if (o.grid_res) config.set_cell_size(*o.grid_res);
    const fs::path dir = root / kind;
    auto sim = simulate(config, dir);
    FilterConfig filter_config = default_filter_config(sim.scenario.grid, sim.scenario.anchor_map());
    Options overrides = o;
    overrides.grid_res.reset();
    apply_filter_overrides(filter_config, overrides);
    const auto estimates = filter(filter_config, sim.output.observations, false, dir);
    rows.emplace_back(kind, evaluate(estimates, sim.output.truth, kind, dir));
    if (kind == "dynamic") {
      const auto residuals = bssd_residuals(sim.scenario, sim.output, false);
      calibrate(residuals, o.components, o.seed.value_or(42), root / "calibration");
    }
  }
  write_file(root / "stats.csv", [&](std::ostream& out) { write_stats(out, rows); });
  return 0;
}

void add_filter_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--grid-res", o.grid_res, "Cell size in metres")->check(CLI::PositiveNumber);
  cmd->add_option("--combine", o.combine, "Likelihood combination: sum or product")
      ->check(CLI::IsMember({"sum", "product"}));
  cmd->add_option("--radius", o.radius, "Weighted-mean radius in metres")->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  setup_logging();
  CLI::App app{"Grid-based multi-sensor positioning"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Generate observations and truth from a scenario");
  sim->add_option("--config", o.config, "Scenario JSON");
  sim->add_option("--kind", o.kind, "Built-in scenario when no config is given")
      ->check(CLI::IsMember({"static", "dynamic"}));
  sim->add_option("--seed", o.seed, "Random seed");
  sim->add_option("--out", o.out, "Output directory");
  sim->add_option("--grid-res", o.grid_res, "Cell size in metres")->check(CLI::PositiveNumber);

  auto* flt = app.add_subcommand("filter", "Run the grid filter over an observation file");
  flt->add_option("--config", o.config, "Filter JSON")->required();
  flt->add_option("--observations", o.observations, "Observation CSV")->required();
  flt->add_option("--out", o.out, "Output directory");
  flt->add_flag("--arrival-order", o.arrival_order, "Process in file order and reject late events");
  add_filter_flags(flt, o);

  auto* eva = app.add_subcommand("evaluate", "Error statistics of estimates against truth");
  eva->add_option("--estimates", o.estimates, "Estimates CSV")->required();
  eva->add_option("--truth", o.truth, "Truth CSV")->required();
  eva->add_option("--label", o.label, "Row label in the stats table");
  eva->add_option("--out", o.out, "Output directory");

  auto* cal = app.add_subcommand("calibrate", "Fit a Gaussian mixture to residuals");
  cal->add_option("--residuals", o.residuals, "Residual CSV")->required();
  cal->add_option("--components", o.components, "Number of mixture components")->check(CLI::PositiveNumber);
  cal->add_option("--seed", o.seed, "Random seed");
  cal->add_option("--out", o.out, "Output directory");

  auto* demo = app.add_subcommand("demo", "Static and dynamic end-to-end runs");
  demo->add_option("--seed", o.seed, "Random seed");
  demo->add_option("--out", o.out, "Output directory");
  demo->add_option("--epochs", o.epochs, "Static epochs")->check(CLI::PositiveNumber);
  demo->add_option("--duration", o.duration, "Dynamic duration in seconds")->check(CLI::PositiveNumber);
  demo->add_option("--components", o.components, "Mixture components for calibration")
      ->check(CLI::PositiveNumber);
  add_filter_flags(demo, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(o);
    if (flt->parsed()) return cmd_filter(o);
    if (eva->parsed()) return cmd_evaluate(o);
    if (cal->parsed()) return cmd_calibrate(o);
    if (demo->parsed()) return cmd_demo(o);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace gridfuse
