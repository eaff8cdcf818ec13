#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "segloc/bench.hpp"
#include "segloc/error.hpp"
#include "segloc/geometry.hpp"
#include "segloc/localizer.hpp"
#include "segloc/propagation.hpp"

namespace segloc::io {

using nlohmann::json;

/// Used when a scenario file gives no building height.
inline constexpr double kDefaultBuildingHeight = 50.0;

inline constexpr std::string_view kMeasurementHeader = "x,y,z,rss_db,los";
inline constexpr std::string_view kBenchHeader = "method,sweep_value,trial_seed,rmse_m,runtime_ms";
inline constexpr std::string_view kSummaryHeader = "method,sweep_value,rmse_m,trials,failed";

// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error("format_double failed");
  return std::string(buf.data(), end);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::string_view trim_cr(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

// ---------------------------------------------------------------- measurements

inline std::string measurements_to_csv(std::span<const Measurement> ms) {
  std::string out(kMeasurementHeader);
  out += '\n';
  for (const Measurement& m : ms) {
    out += format_double(m.position.x) + ',' + format_double(m.position.y) + ',' +
           format_double(m.position.z) + ',' + format_double(m.rss_db) + ',';
    out += m.truth_los ? (*m.truth_los ? "1" : "0") : "NA";
    out += '\n';
  }
  return out;
}

/// With keep_truth = false the los column is validated but discarded.
inline MeasurementSet measurements_from_csv(std::string_view text, bool keep_truth = true) {
  MeasurementSet out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    const std::string_view line = trim_cr(raw);
    if (!header_seen) {
      if (line != kMeasurementHeader) {
        throw ParseError("expected header '" + std::string(kMeasurementHeader) + "'", line_no);
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 5) throw ParseError("expected 5 fields", line_no);
    std::array<double, 4> v{};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto d = parse_double(trim_cr(fields[i]));
      if (!d) throw ParseError("malformed number '" + std::string(fields[i]) + "'", line_no);
      if (!std::isfinite(*d)) throw ParseError("non-finite value", line_no);
      v[i] = *d;
    }
    Measurement m{{v[0], v[1], v[2]}, v[3], std::nullopt};
    const std::string_view los = trim_cr(fields[4]);
    if (los == "1") {
      m.truth_los = true;
    } else if (los == "0") {
      m.truth_los = false;
    } else if (los != "NA") {
      throw ParseError("los must be 0, 1 or NA", line_no);
    }
    if (!keep_truth) m.truth_los.reset();
    out.push_back(m);
  }
  if (!header_seen) throw ParseError("missing header", 1);
  return out;
}

inline void write_measurements(const std::string& path, std::span<const Measurement> ms) {
  write_file(path, measurements_to_csv(ms));
}

inline MeasurementSet read_measurements(const std::string& path, bool keep_truth = true) {
  return measurements_from_csv(read_file(path), keep_truth);
}

// -------------------------------------------------------------------- scenario

inline json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() < 2 || j.size() > 3) throw Error("expected [x, y] or [x, y, z]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.size() == 3 ? j.at(2).get<double>() : 0.0};
}

inline std::vector<Vec2> vertices_from_json(const json& b) {
  std::vector<Vec2> vs;
  for (const json& v : b.at("vertices")) {
    if (!v.is_array() || v.size() != 2) throw Error("vertex must be [x, y]");
    vs.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  }
  return vs;
}

/// Map with heights (simulator side).
inline EnvironmentMap2D environment_from_json(const json& j) {
  std::vector<Building> bs;
  for (const json& b : j.value("buildings", json::array())) {
    bs.emplace_back(vertices_from_json(b), b.value("height", kDefaultBuildingHeight));
  }
  return EnvironmentMap2D(SquareBounds{j.at("L").get<double>()}, std::move(bs));
}

/// Footprints only; any height fields are never read.
inline FootprintMap footprints_from_json(const json& j) {
  std::vector<Footprint> fps;
  for (const json& b : j.value("buildings", json::array())) fps.emplace_back(vertices_from_json(b));
  return FootprintMap(SquareBounds{j.at("L").get<double>()}, std::move(fps));
}

inline Scenario scenario_from_json(const json& j) {
  try {
    Scenario s;
    s.map = environment_from_json(j);
    s.source = vec_from_json(j.at("source"));
    s.aerial_height = j.value("h", 20.0);
    PropagationTruth t;
    t.power_db = j.value("power_db", t.power_db);
    t.eta_los = j.value("eta_los", t.eta_los);
    t.eta_nlos = j.value("eta_nlos", t.eta_nlos);
    t.sigma_los = j.value("sigma_los", t.sigma_los);
    t.sigma_nlos = j.value("sigma_nlos", t.sigma_nlos);
    t.antenna_exponent = j.value("antenna_exponent", t.antenna_exponent);
    s.truth = t;
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw Error(std::string("scenario: ") + e.what());
  }
}

inline json scenario_to_json(const Scenario& s) {
  json buildings = json::array();
  for (const Building& b : s.map.buildings()) {
    json vs = json::array();
    for (const Vec2& v : b.footprint.vertices()) vs.push_back({v.x, v.y});
    buildings.push_back({{"vertices", vs}, {"height", b.height}});
  }
  return json{{"L", s.map.bounds().side},
              {"buildings", buildings},
              {"source", vec_to_json(s.source)},
              {"h", s.aerial_height},
              {"power_db", s.truth.power_db},
              {"eta_los", s.truth.eta_los},
              {"eta_nlos", s.truth.eta_nlos},
              {"sigma_los", s.truth.sigma_los},
              {"sigma_nlos", s.truth.sigma_nlos},
              {"antenna_exponent", s.truth.antenna_exponent}};
}

inline json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline Scenario read_scenario(const std::string& path) { return scenario_from_json(read_json(path)); }

inline FootprintMap read_footprint_map(const std::string& path) {
  try {
    return footprints_from_json(read_json(path));
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------- result

inline json params_to_json(const PropagationParams& p) {
  return json{{"a0", p.a0}, {"b0", p.b0}, {"c0", p.c0}, {"a1", p.a1}, {"b1", p.b1}, {"c1", p.c1}};
}

inline PropagationParams params_from_json(const json& j) {
  return {j.at("a0").get<double>(), j.at("b0").get<double>(), j.at("c0").get<double>(),
          j.at("a1").get<double>(), j.at("b1").get<double>(), j.at("c1").get<double>()};
}

inline json result_to_json(const LocalizationResult& r) {
  json svs = json::array();
  for (const SupportVectorAngle& a : r.sv_hats) svs.push_back(a.alpha);
  return json{{"s_hat", vec_to_json(r.s_hat)},
              {"sv_hats", svs},
              {"sector_boundaries", r.sector_boundaries},
              {"phi_hat", params_to_json(r.phi_hat)},
              {"total_residual", r.total_residual},
              {"refit_residual", r.refit_residual},
              {"per_sector_residuals", r.per_sector_residuals},
              {"candidate_count", r.candidate_count},
              {"excluded_count", r.excluded_count},
              {"coarse_s_hat", vec_to_json(r.coarse_s_hat)},
              {"coarse_total_residual", r.coarse_total_residual},
              {"minimizer_count", r.minimizer_count},
              {"degenerate", r.degenerate()}};
}

inline LocalizationResult result_from_json(const json& j) {
  LocalizationResult r;
  r.s_hat = vec_from_json(j.at("s_hat"));
  for (const json& a : j.at("sv_hats")) r.sv_hats.emplace_back(a.get<double>());
  r.sector_boundaries = j.at("sector_boundaries").get<std::vector<double>>();
  r.phi_hat = params_from_json(j.at("phi_hat"));
  r.total_residual = j.at("total_residual").get<double>();
  r.refit_residual = j.at("refit_residual").get<double>();
  r.per_sector_residuals = j.at("per_sector_residuals").get<std::vector<double>>();
  r.candidate_count = j.at("candidate_count").get<std::size_t>();
  r.excluded_count = j.at("excluded_count").get<std::size_t>();
  r.coarse_s_hat = vec_from_json(j.at("coarse_s_hat"));
  r.coarse_total_residual = j.at("coarse_total_residual").get<double>();
  r.minimizer_count = j.at("minimizer_count").get<std::size_t>();
  return r;
}

inline json tensor_to_json(const ErrorTensor& t) {
  json angles = json::array();
  for (const SupportVectorAngle& a : t.angles) angles.push_back(a.alpha);
  json entries = json::array();
  for (const ErrorTensor::Entry& e : t.entries) {
    entries.push_back(
        {{"source", vec_to_json(e.source)}, {"boundaries", e.boundaries}, {"residuals", e.residuals}});
  }
  return json{{"angles", angles}, {"entries", entries}};
}

inline void write_json(const std::string& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// ----------------------------------------------------------------------- bench

inline std::string bench_records_to_csv(std::span<const BenchRecord> records) {
  std::string out(kBenchHeader);
  out += '\n';
  for (const BenchRecord& r : records) {
    out += std::string(method_name(r.method)) + ',' + format_double(r.sweep_value) + ',' +
           std::to_string(r.trial_seed) + ',' + format_double(r.rmse_m) + ',' +
           format_double(r.runtime_ms) + '\n';
  }
  return out;
}

inline std::vector<BenchRecord> bench_records_from_csv(std::string_view text) {
  std::vector<BenchRecord> out;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    const std::string_view line = trim_cr(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!header_seen) {
      if (line != kBenchHeader) throw ParseError("unexpected bench header", line_no);
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 5) throw ParseError("expected 5 fields", line_no);
    const auto sweep = parse_double(f[1]);
    const auto err = parse_double(f[3]);
    const auto ms = parse_double(f[4]);
    std::uint64_t seed = 0;
    const auto [p, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), seed);
    if (!sweep || !err || !ms || ec != std::errc{} || p != f[2].data() + f[2].size()) {
      throw ParseError("malformed bench row", line_no);
    }
    Method method;
    try {
      method = parse_method(f[0]);
    } catch (const Error&) {
      throw ParseError("unknown method", line_no);
    }
    out.push_back({method, *sweep, seed, *err, *ms});
  }
  if (!header_seen) throw ParseError("missing header", 1);
  return out;
}

inline std::string bench_summary_to_csv(std::span<const BenchSummary> rows) {
  std::string out(kSummaryHeader);
  out += '\n';
  for (const BenchSummary& s : rows) {
    out += std::string(method_name(s.method)) + ',' + format_double(s.sweep_value) + ',' +
           format_double(s.rmse_m) + ',' + std::to_string(s.trials) + ',' +
           std::to_string(s.failed) + '\n';
  }
  return out;
}

/// Plan file. The scenario is inline under "scenario"; the grid always
/// covers the scenario's square.
inline BenchPlan plan_from_json(const json& j) {
  try {
    BenchPlan p;
    p.scenario = scenario_from_json(j.at("scenario"));
    const json& sweep = j.at("sweep");
    p.sweep = parse_sweep(sweep.at("parameter").get<std::string>());
    p.values = sweep.at("values").get<std::vector<double>>();
    p.count = j.value("count", p.count);
    p.trials = j.value("trials", p.trials);
    p.seed_base = j.value("seed_base", p.seed_base);
    if (j.contains("methods")) {
      p.methods.clear();
      for (const json& m : j.at("methods")) p.methods.push_back(parse_method(m.get<std::string>()));
    }
    const json grid = j.value("grid", json::object());
    std::optional<double> refine;
    if (grid.contains("refine") && !grid.at("refine").is_null()) refine = grid.at("refine").get<double>();
    p.grid = GridSpec::covering(p.scenario.map.bounds(), grid.value("spacing", 5.0), refine,
                                grid.value("nb", std::size_t{31}));
    p.validate();
    return p;
  } catch (const json::exception& e) {
    throw Error(std::string("plan: ") + e.what());
  }
}

}  // namespace segloc::io
