#include "gridfuse/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gridfuse {

namespace {

using nlohmann::json;

constexpr const char* kObservationHeader = "t,sensor,type,ref_ids,values";
constexpr const char* kTruthHeader = "t,x,y,z";
constexpr const char* kEstimateHeader = "t,x,y,z,map_index,map_mass,radius,support";
constexpr const char* kStatsHeader =
    "label,count,mean,median,variance,q68_27,q95_45,q99_73,p25,p50,p75";
constexpr const char* kEcdfHeader = "error,cdf";
constexpr const char* kResidualHeader = "residual";
constexpr const char* kGmmHeader = "component,weight,mean,variance";

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

class CsvReader {
 public:
  CsvReader(std::istream& in, const char* header) : in_(in) {
    std::string first;
    if (!next_raw(first) || first != header) {
      throw DataError(std::string("expected header '") + header + "'");
    }
  }

  /// Next non-empty row split on commas; false at end of input.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (next_raw(line)) {
      if (line.empty()) continue;
      fields = split(line, ',');
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw DataError("line " + std::to_string(line_) + ": " + what);
  }

  double number(const std::string& field) const {
    double v = 0.0;
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end || field.empty()) fail("not a number: '" + field + "'");
    return v;
  }

  long integer(const std::string& field) const {
    long v = 0;
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc() || ptr != end || field.empty()) fail("not an integer: '" + field + "'");
    return v;
  }

  void expect_fields(const std::vector<std::string>& fields, std::size_t n) const {
    if (fields.size() != n) {
      fail("expected " + std::to_string(n) + " fields, got " + std::to_string(fields.size()));
    }
  }

 private:
  bool next_raw(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  std::istream& in_;
  std::size_t line_ = 0;
};

// JSON helpers

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw DataError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.count(key)) throw DataError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read_opt(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw DataError("position must be an array of three numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json model_json(const NoiseModel& model) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianModel>) {
          return {{"type", "gaussian"}, {"mean", m.mean}, {"stddev", m.stddev}};
        } else if constexpr (std::is_same_v<T, UniformModel>) {
          return {{"type", "uniform"}, {"lower", m.lower}, {"upper", m.upper}};
        } else if constexpr (std::is_same_v<T, GmmModel>) {
          json comps = json::array();
          for (const auto& c : m.components) {
            comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
          }
          return {{"type", "gmm"}, {"components", comps}};
        } else {
          return {{"type", "mixture"},
                  {"ratio", m->ratio},
                  {"primary", model_json(m->primary)},
                  {"secondary", model_json(m->secondary)}};
        }
      },
      model);
}

NoiseModel model_from(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw DataError("noise model needs a 'type'");
  const auto type = j.at("type").get<std::string>();
  NoiseModel model;
  if (type == "gaussian") {
    check_keys(j, {"type", "mean", "stddev"}, "gaussian model");
    model = GaussianModel{j.at("mean").get<double>(), j.at("stddev").get<double>()};
  } else if (type == "uniform") {
    check_keys(j, {"type", "lower", "upper"}, "uniform model");
    model = UniformModel{j.at("lower").get<double>(), j.at("upper").get<double>()};
  } else if (type == "gmm") {
    check_keys(j, {"type", "components"}, "gmm model");
    GmmModel gmm;
    for (const auto& c : j.at("components")) {
      check_keys(c, {"weight", "mean", "variance"}, "gmm component");
      gmm.components.push_back(
          {c.at("weight").get<double>(), c.at("mean").get<double>(), c.at("variance").get<double>()});
    }
    model = gmm;
  } else if (type == "mixture") {
    check_keys(j, {"type", "ratio", "primary", "secondary"}, "mixture model");
    model = make_mixture(j.at("ratio").get<double>(), model_from(j.at("primary")),
                         model_from(j.at("secondary")));
  } else {
    throw DataError("unknown noise model type '" + type + "'");
  }
  try {
    validate(model);
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid noise model: ") + e.what());
  }
  return model;
}

json noise_json(const SimNoise& n) {
  return {{"uwb_mean", n.uwb.mean},
          {"uwb_stddev", n.uwb.stddev},
          {"uwb_outlier_rate", n.uwb_outlier_rate},
          {"uwb_outlier_lower", n.uwb_outlier.lower},
          {"uwb_outlier_upper", n.uwb_outlier.upper},
          {"tdoa_sigma", n.tdoa_sigma},
          {"aoa_sigma", n.aoa_sigma},
          {"gnss_sigma", n.gnss_sigma},
          {"nlos_bias_mean", n.nlos_bias_mean},
          {"receiver_clock_sigma", n.receiver_clock_sigma},
          {"odometry_speed_sigma", n.odometry_speed_sigma},
          {"odometry_heading_sigma", n.odometry_heading_sigma},
          {"heading_min_speed", n.heading_min_speed}};
}

SimNoise noise_from(const json& j) {
  check_keys(j,
             {"uwb_mean", "uwb_stddev", "uwb_outlier_rate", "uwb_outlier_lower", "uwb_outlier_upper",
              "tdoa_sigma", "aoa_sigma", "gnss_sigma", "nlos_bias_mean", "receiver_clock_sigma",
              "odometry_speed_sigma", "odometry_heading_sigma", "heading_min_speed"},
             "noise");
  SimNoise n;
  read_opt(j, "uwb_mean", n.uwb.mean);
  read_opt(j, "uwb_stddev", n.uwb.stddev);
  read_opt(j, "uwb_outlier_rate", n.uwb_outlier_rate);
  read_opt(j, "uwb_outlier_lower", n.uwb_outlier.lower);
  read_opt(j, "uwb_outlier_upper", n.uwb_outlier.upper);
  read_opt(j, "tdoa_sigma", n.tdoa_sigma);
  read_opt(j, "aoa_sigma", n.aoa_sigma);
  read_opt(j, "gnss_sigma", n.gnss_sigma);
  read_opt(j, "nlos_bias_mean", n.nlos_bias_mean);
  read_opt(j, "receiver_clock_sigma", n.receiver_clock_sigma);
  read_opt(j, "odometry_speed_sigma", n.odometry_speed_sigma);
  read_opt(j, "odometry_heading_sigma", n.odometry_heading_sigma);
  read_opt(j, "heading_min_speed", n.heading_min_speed);
  return n;
}

void check_schema(const json& doc, const char* schema) {
  if (!doc.is_object() || !doc.contains("schema")) throw DataError("configuration lacks a 'schema' field");
  const auto found = doc.at("schema").get<std::string>();
  if (found != schema) throw DataError("unsupported schema '" + found + "', expected '" + schema + "'");
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
}

template <class F>
auto with_json_errors(F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid configuration: ") + e.what());
  }
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_observations(std::ostream& out, std::span<const Observation> observations) {
  out << kObservationHeader << '\n';
  for (const auto& obs : observations) {
    const std::string t = format_double(obs.timestamp);
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, RangeObservation>) {
            out << t << ",uwb,range," << p.anchor_id << ',' << format_double(p.range) << '\n';
          } else if constexpr (std::is_same_v<T, RangeDifferenceObservation>) {
            out << t << ",uwb,tdoa," << p.ref_a_id << ';' << p.ref_b_id << ','
                << format_double(p.difference) << '\n';
          } else if constexpr (std::is_same_v<T, AngleObservation>) {
            out << t << ",uwb,aoa," << p.anchor_id << ',' << format_double(p.angle) << '\n';
          } else if constexpr (std::is_same_v<T, GnssPseudoranges>) {
            for (const auto& s : p.satellites) {
              out << t << ",gnss,gnss," << s.sat_id << ',' << format_double(s.position.x) << ','
                  << format_double(s.position.y) << ',' << format_double(s.position.z) << ','
                  << format_double(s.pseudorange) << ','
                  << (s.visibility == Visibility::kLos ? "LOS" : "NLOS") << '\n';
            }
          } else {
            out << t << ",odometry,odo,," << format_double(p.speed) << ','
                << (p.heading ? format_double(*p.heading) : std::string()) << '\n';
          }
        },
        obs.payload);
  }
}

std::vector<Observation> read_observations(std::istream& in) {
  CsvReader reader(in, kObservationHeader);
  std::vector<Observation> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() < 5) reader.fail("observation rows need at least five fields");
    const double t = reader.number(f[0]);
    if (!std::isfinite(t)) reader.fail("timestamp must be finite");
    const std::string& type = f[2];
    if (type == "range") {
      reader.expect_fields(f, 5);
      out.push_back({t, RangeObservation{f[3], reader.number(f[4])}});
    } else if (type == "tdoa") {
      reader.expect_fields(f, 5);
      const auto ids = split(f[3], ';');
      if (ids.size() != 2 || ids[0].empty() || ids[1].empty()) reader.fail("tdoa needs two anchor ids 'a;b'");
      out.push_back({t, RangeDifferenceObservation{ids[0], ids[1], reader.number(f[4])}});
    } else if (type == "aoa") {
      reader.expect_fields(f, 5);
      out.push_back({t, AngleObservation{f[3], reader.number(f[4])}});
    } else if (type == "gnss") {
      reader.expect_fields(f, 9);
      Visibility vis;
      if (f[8] == "LOS") {
        vis = Visibility::kLos;
      } else if (f[8] == "NLOS") {
        vis = Visibility::kNlos;
      } else {
        reader.fail("visibility must be LOS or NLOS");
      }
      SatelliteObservation sat{f[3],
                               {reader.number(f[4]), reader.number(f[5]), reader.number(f[6])},
                               reader.number(f[7]),
                               vis};
      auto* prev = out.empty() ? nullptr : std::get_if<GnssPseudoranges>(&out.back().payload);
      if (prev && out.back().timestamp == t) {
        prev->satellites.push_back(std::move(sat));
      } else {
        out.push_back({t, GnssPseudoranges{{std::move(sat)}}});
      }
    } else if (type == "odo") {
      if (f.size() != 5 && f.size() != 6) reader.fail("odometry rows carry speed and optional heading");
      OdometryObservation odo;
      odo.speed = reader.number(f[4]);
      if (f.size() == 6 && !f[5].empty()) odo.heading = reader.number(f[5]);
      if (odo.speed < 0.0) reader.fail("speed must be non-negative");
      out.push_back({t, odo});
    } else {
      reader.fail("unknown observation type '" + type + "'");
    }
  }
  return out;
}

void write_truth(std::ostream& out, std::span<const GroundTruthSample> truth) {
  out << kTruthHeader << '\n';
  for (const auto& s : truth) {
    out << format_double(s.t) << ',' << format_double(s.position.x) << ','
        << format_double(s.position.y) << ',' << format_double(s.position.z) << '\n';
  }
}

std::vector<GroundTruthSample> read_truth(std::istream& in) {
  CsvReader reader(in, kTruthHeader);
  std::vector<GroundTruthSample> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.expect_fields(f, 4);
    GroundTruthSample s{reader.number(f[0]), {reader.number(f[1]), reader.number(f[2]), reader.number(f[3])}};
    if (!out.empty() && !(s.t > out.back().t)) reader.fail("truth timestamps must increase");
    out.push_back(s);
  }
  return out;
}

void write_estimates(std::ostream& out, std::span<const Estimate> estimates) {
  out << kEstimateHeader << '\n';
  for (const auto& e : estimates) {
    out << format_double(e.timestamp) << ',' << format_double(e.position.x) << ','
        << format_double(e.position.y) << ',' << format_double(e.position.z) << ','
        << e.map_cell.value << ',' << format_double(e.map_mass) << ',' << format_double(e.radius)
        << ',' << e.support_count << '\n';
  }
}

std::vector<Estimate> read_estimates(std::istream& in) {
  CsvReader reader(in, kEstimateHeader);
  std::vector<Estimate> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.expect_fields(f, 8);
    Estimate e;
    e.timestamp = reader.number(f[0]);
    e.position = {reader.number(f[1]), reader.number(f[2]), reader.number(f[3])};
    const long index = reader.integer(f[4]);
    if (index < 0) reader.fail("map index must be non-negative");
    e.map_cell = GridIndex{static_cast<std::size_t>(index)};
    e.map_mass = reader.number(f[5]);
    e.radius = reader.number(f[6]);
    e.support_count = static_cast<int>(reader.integer(f[7]));
    out.push_back(e);
  }
  return out;
}

void write_stats(std::ostream& out, std::span<const std::pair<std::string, StatsSummary>> rows) {
  out << kStatsHeader << '\n';
  for (const auto& [label, s] : rows) {
    out << label << ',' << s.count;
    for (double v : {s.mean, s.median, s.variance, s.sigma1, s.sigma2, s.sigma3, s.p25, s.p50, s.p75}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

void write_ecdf(std::ostream& out, std::span<const std::pair<double, double>> steps) {
  out << kEcdfHeader << '\n';
  for (const auto& [x, p] : steps) out << format_double(x) << ',' << format_double(p) << '\n';
}

void write_residuals(std::ostream& out, std::span<const double> residuals) {
  out << kResidualHeader << '\n';
  for (double r : residuals) out << format_double(r) << '\n';
}

std::vector<double> read_residuals(std::istream& in) {
  CsvReader reader(in, kResidualHeader);
  std::vector<double> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.expect_fields(f, 1);
    const double v = reader.number(f[0]);
    if (!std::isfinite(v)) reader.fail("residuals must be finite");
    out.push_back(v);
  }
  return out;
}

void write_gmm(std::ostream& out, const GmmModel& model) {
  out << kGmmHeader << '\n';
  for (std::size_t c = 0; c < model.components.size(); ++c) {
    const auto& comp = model.components[c];
    out << c + 1 << ',' << format_double(comp.weight) << ',' << format_double(comp.mean) << ','
        << format_double(comp.variance) << '\n';
  }
}

GmmModel read_gmm(std::istream& in) {
  CsvReader reader(in, kGmmHeader);
  std::vector<GmmComponent> comps;
  std::vector<std::string> f;
  while (reader.next(f)) {
    reader.expect_fields(f, 4);
    comps.push_back({reader.number(f[1]), reader.number(f[2]), reader.number(f[3])});
  }
  try {
    return make_gmm(std::move(comps), true);
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid GMM: ") + e.what());
  }
}

std::uint64_t ScenarioConfig::seed() const {
  return kind == "dynamic" ? dynamic_config.seed : static_config.seed;
}

void ScenarioConfig::set_seed(std::uint64_t seed) {
  static_config.seed = seed;
  dynamic_config.seed = seed;
}

void ScenarioConfig::set_cell_size(double cell_size) {
  static_config.cell_size = cell_size;
  dynamic_config.cell_size = cell_size;
}

ScenarioConfig parse_scenario_config(const std::string& json_text) {
  const json doc = parse_json(json_text);
  check_schema(doc, kScenarioSchema);
  return with_json_errors([&] {
    check_keys(doc, {"schema", "kind", "seed", "static", "dynamic", "noise", "emit"}, "scenario");
    ScenarioConfig c;
    read_opt(doc, "kind", c.kind);
    if (c.kind != "static" && c.kind != "dynamic") throw DataError("kind must be 'static' or 'dynamic'");
    if (doc.contains("seed")) c.set_seed(doc.at("seed").get<std::uint64_t>());
    if (doc.contains("noise")) {
      c.static_config.noise = noise_from(doc.at("noise"));
      c.dynamic_config.noise = c.static_config.noise;
    }
    if (doc.contains("static")) {
      const json& s = doc.at("static");
      check_keys(s, {"epochs", "cell_size", "grid_size", "position", "nlos_satellites"}, "static");
      auto& sc = c.static_config;
      read_opt(s, "epochs", sc.epochs);
      read_opt(s, "cell_size", sc.cell_size);
      read_opt(s, "grid_size", sc.grid_size);
      if (s.contains("position")) sc.position = vec_from(s.at("position"));
      read_opt(s, "nlos_satellites", sc.nlos_satellites);
    }
    if (doc.contains("dynamic")) {
      const json& d = doc.at("dynamic");
      check_keys(d,
                 {"duration", "speed", "straight", "turn_radius", "antenna_height", "cell_size",
                  "grid_width", "grid_height", "rates", "los_spell", "nlos_spell"},
                 "dynamic");
      auto& dc = c.dynamic_config;
      read_opt(d, "duration", dc.duration);
      read_opt(d, "speed", dc.speed);
      read_opt(d, "straight", dc.straight);
      read_opt(d, "turn_radius", dc.turn_radius);
      read_opt(d, "antenna_height", dc.antenna_height);
      read_opt(d, "cell_size", dc.cell_size);
      read_opt(d, "grid_width", dc.grid_width);
      read_opt(d, "grid_height", dc.grid_height);
      read_opt(d, "los_spell", dc.los_spell);
      read_opt(d, "nlos_spell", dc.nlos_spell);
      if (d.contains("rates")) {
        const json& r = d.at("rates");
        check_keys(r, {"gnss_hz", "uwb_hz", "odometry_hz", "uwb_offset", "odometry_offset"}, "rates");
        read_opt(r, "gnss_hz", dc.rates.gnss_hz);
        read_opt(r, "uwb_hz", dc.rates.uwb_hz);
        read_opt(r, "odometry_hz", dc.rates.odometry_hz);
        read_opt(r, "uwb_offset", dc.rates.uwb_offset);
        read_opt(r, "odometry_offset", dc.rates.odometry_offset);
      }
    }
    if (doc.contains("emit")) {
      const json& e = doc.at("emit");
      check_keys(e, {"gnss", "ranges", "tdoa", "aoa", "odometry"}, "emit");
      read_opt(e, "gnss", c.emit_gnss);
      read_opt(e, "ranges", c.emit_ranges);
      read_opt(e, "tdoa", c.emit_tdoa);
      read_opt(e, "aoa", c.emit_aoa);
      read_opt(e, "odometry", c.emit_odometry);
    }
    return c;
  });
}

std::string scenario_config_json(const ScenarioConfig& c) {
  const auto& sc = c.static_config;
  const auto& dc = c.dynamic_config;
  json doc = {{"schema", kScenarioSchema},
              {"kind", c.kind},
              {"seed", c.seed()},
              {"static",
               {{"epochs", sc.epochs},
                {"cell_size", sc.cell_size},
                {"grid_size", sc.grid_size},
                {"position", vec_json(sc.position)},
                {"nlos_satellites", sc.nlos_satellites}}},
              {"dynamic",
               {{"duration", dc.duration},
                {"speed", dc.speed},
                {"straight", dc.straight},
                {"turn_radius", dc.turn_radius},
                {"antenna_height", dc.antenna_height},
                {"cell_size", dc.cell_size},
                {"grid_width", dc.grid_width},
                {"grid_height", dc.grid_height},
                {"rates",
                 {{"gnss_hz", dc.rates.gnss_hz},
                  {"uwb_hz", dc.rates.uwb_hz},
                  {"odometry_hz", dc.rates.odometry_hz},
                  {"uwb_offset", dc.rates.uwb_offset},
                  {"odometry_offset", dc.rates.odometry_offset}}},
                {"los_spell", dc.los_spell},
                {"nlos_spell", dc.nlos_spell}}},
              {"noise", noise_json(c.kind == "dynamic" ? dc.noise : sc.noise)},
              {"emit",
               {{"gnss", c.emit_gnss},
                {"ranges", c.emit_ranges},
                {"tdoa", c.emit_tdoa},
                {"aoa", c.emit_aoa},
                {"odometry", c.emit_odometry}}}};
  return doc.dump(2) + "\n";
}

Scenario build_scenario(const ScenarioConfig& c) {
  Scenario s = c.kind == "dynamic" ? make_dynamic_scenario(c.dynamic_config)
                                   : make_static_scenario(c.static_config);
  s.emit_gnss = c.emit_gnss;
  s.emit_ranges = c.emit_ranges;
  s.emit_tdoa = c.emit_tdoa;
  s.emit_aoa = c.emit_aoa;
  s.emit_odometry = c.emit_odometry;
  s.validate();
  return s;
}

FilterConfig parse_filter_config(const std::string& json_text) {
  const json doc = parse_json(json_text);
  check_schema(doc, kFilterSchema);
  FilterConfig config = with_json_errors([&] {
    check_keys(doc,
               {"schema", "grid", "anchors", "combine", "range_model", "tdoa_model", "aoa_model",
                "gnss_models", "sigma_speed", "sigma_heading", "prediction", "wm_radius", "max_gap",
                "reinit_on_gap", "recenter", "recenter_margin", "recenter_floor"},
               "filter");
    if (!doc.contains("grid")) throw DataError("filter configuration lacks a grid");
    const json& g = doc.at("grid");
    check_keys(g, {"origin", "cell_size", "extent", "dimensionality"}, "grid");
    GridSpec grid;
    grid.origin = vec_from(g.at("origin"));
    grid.cell_size = g.at("cell_size").get<double>();
    const auto extent = g.at("extent").get<std::vector<int>>();
    if (extent.size() != 3) throw DataError("grid extent must have three entries");
    grid.extent = {extent[0], extent[1], extent[2]};
    grid.dimensionality = g.value("dimensionality", extent[2] > 1 ? 3 : 2);

    AnchorMap anchors;
    if (doc.contains("anchors")) {
      for (const auto& a : doc.at("anchors")) {
        check_keys(a, {"id", "position"}, "anchor");
        ReferencePoint p{a.at("id").get<std::string>(), vec_from(a.at("position")), ReferenceKind::kAnchor};
        if (!anchors.emplace(p.id, p).second) throw DataError("duplicate anchor id '" + p.id + "'");
      }
    }
    FilterConfig c = default_filter_config(grid, anchors);
    if (doc.contains("combine")) {
      const auto mode = doc.at("combine").get<std::string>();
      if (mode == "sum") {
        c.combine = CombineMode::kSum;
      } else if (mode == "product") {
        c.combine = CombineMode::kProduct;
      } else {
        throw DataError("combine must be 'sum' or 'product'");
      }
    }
    if (doc.contains("range_model")) c.range_model = model_from(doc.at("range_model"));
    if (doc.contains("tdoa_model")) c.tdoa_model = model_from(doc.at("tdoa_model"));
    if (doc.contains("aoa_model")) c.aoa_model = model_from(doc.at("aoa_model"));
    if (doc.contains("gnss_models")) {
      const json& m = doc.at("gnss_models");
      check_keys(m, {"los_los", "nlos_los", "los_nlos"}, "gnss_models");
      c.gnss_models = {model_from(m.at("los_los")), model_from(m.at("nlos_los")),
                       model_from(m.at("los_nlos"))};
    }
    read_opt(doc, "sigma_speed", c.sigma_speed);
    read_opt(doc, "sigma_heading", c.sigma_heading);
    if (doc.contains("prediction")) {
      const json& p = doc.at("prediction");
      check_keys(p, {"variant", "source_prune_ratio", "kernel_prune_ratio", "truncate", "random_walk_sigma"},
                 "prediction");
      if (p.contains("variant")) {
        const auto v = p.at("variant").get<std::string>();
        if (v == "source_weighted") {
          c.prediction.variant = PredictionVariant::kSourceWeighted;
        } else if (v == "literal") {
          c.prediction.variant = PredictionVariant::kLiteral;
        } else {
          throw DataError("prediction variant must be 'source_weighted' or 'literal'");
        }
      }
      read_opt(p, "source_prune_ratio", c.prediction.source_prune_ratio);
      read_opt(p, "kernel_prune_ratio", c.prediction.kernel_prune_ratio);
      read_opt(p, "truncate", c.prediction.truncate);
      read_opt(p, "random_walk_sigma", c.prediction.random_walk_sigma);
    }
    read_opt(doc, "wm_radius", c.wm_radius);
    read_opt(doc, "max_gap", c.max_gap);
    read_opt(doc, "reinit_on_gap", c.reinit_on_gap);
    read_opt(doc, "recenter", c.recenter);
    read_opt(doc, "recenter_margin", c.recenter_margin);
    read_opt(doc, "recenter_floor", c.recenter_floor);
    return c;
  });
  try {
    config.validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("invalid filter configuration: ") + e.what());
  }
  return config;
}

std::string filter_config_json(const FilterConfig& c) {
  json anchors = json::array();
  for (const auto& [id, a] : c.anchors) anchors.push_back({{"id", id}, {"position", vec_json(a.position)}});
  json doc = {
      {"schema", kFilterSchema},
      {"grid",
       {{"origin", vec_json(c.grid.origin)},
        {"cell_size", c.grid.cell_size},
        {"extent", c.grid.extent},
        {"dimensionality", c.grid.dimensionality}}},
      {"anchors", anchors},
      {"combine", c.combine == CombineMode::kSum ? "sum" : "product"},
      {"range_model", model_json(c.range_model)},
      {"tdoa_model", model_json(c.tdoa_model)},
      {"aoa_model", model_json(c.aoa_model)},
      {"gnss_models",
       {{"los_los", model_json(c.gnss_models.los_los)},
        {"nlos_los", model_json(c.gnss_models.nlos_los)},
        {"los_nlos", model_json(c.gnss_models.los_nlos)}}},
      {"sigma_speed", c.sigma_speed},
      {"sigma_heading", c.sigma_heading},
      {"prediction",
       {{"variant", c.prediction.variant == PredictionVariant::kSourceWeighted ? "source_weighted" : "literal"},
        {"source_prune_ratio", c.prediction.source_prune_ratio},
        {"kernel_prune_ratio", c.prediction.kernel_prune_ratio},
        {"truncate", c.prediction.truncate},
        {"random_walk_sigma", c.prediction.random_walk_sigma}}},
      {"wm_radius", c.wm_radius},
      {"max_gap", c.max_gap},
      {"reinit_on_gap", c.reinit_on_gap},
      {"recenter", c.recenter},
      {"recenter_margin", c.recenter_margin},
      {"recenter_floor", c.recenter_floor}};
  return doc.dump(2) + "\n";
}

GridSpec regrid(const GridSpec& grid, double cell_size) {
  if (!(cell_size > 0.0)) throw InvalidArgument("cell size must be positive");
  GridSpec out = grid;
  out.cell_size = cell_size;
  for (int axis = 0; axis < grid.dimensionality; ++axis) {
    const double length = grid.extent[axis] * grid.cell_size;
    out.extent[axis] = std::max(2, static_cast<int>(std::lround(length / cell_size)));
  }
  out.validate();
  return out;
}

}  // namespace gridfuse
