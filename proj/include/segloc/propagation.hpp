#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "segloc/error.hpp"
#include "segloc/geometry.hpp"

namespace segloc {

/// Horizontal distances are clamped to this before taking logs; the antenna
/// term diverges directly above the source.
inline constexpr double kMinHorizontalDistance = 1e-3;

/// Ground-truth channel: P * d3^-eta_k * sin(theta)^q in linear scale, plus
/// Gaussian shadowing in dB.
struct PropagationTruth {
  double power_db = 0.0;
  double eta_los = 2.0;
  double eta_nlos = 7.0;
  double sigma_los = 1.0;
  double sigma_nlos = 5.0;
  double antenna_exponent = 5.0;

  void validate() const {
    if (!(sigma_los >= 0.0) || !(sigma_nlos >= 0.0)) throw Error("shadowing sigma must be >= 0");
    if (!std::isfinite(eta_los) || !std::isfinite(eta_nlos) || !std::isfinite(power_db) ||
        !std::isfinite(antenna_exponent) || !std::isfinite(sigma_los) ||
        !std::isfinite(sigma_nlos)) {
      throw Error("propagation parameters must be finite");
    }
  }
};

/// Coefficients of the two-branch log-distance model
///   rho_k = a_k + b_k log10(d3) + c_k log10(d2),  k = 0 (LOS), 1 (NLOS).
struct PropagationParams {
  double a0 = 0.0, b0 = 0.0, c0 = 0.0;
  double a1 = 0.0, b1 = 0.0, c1 = 0.0;

  std::array<double, 6> to_array() const { return {a0, b0, c0, a1, b1, c1}; }

  static PropagationParams from_array(const std::array<double, 6>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }

  friend bool operator==(const PropagationParams&, const PropagationParams&) = default;
};

struct Measurement {
  Vec3 position;
  double rss_db = 0.0;
  std::optional<bool> truth_los;

  friend bool operator==(const Measurement&, const Measurement&) = default;
};

using MeasurementSet = std::vector<Measurement>;

struct Scenario {
  EnvironmentMap2D map;
  Vec3 source;
  double aerial_height = 20.0;
  PropagationTruth truth;

  void validate() const {
    if (source.z != 0.0) throw Error("scenario source must be on the ground (z = 0)");
    if (!(aerial_height > 0.0)) throw Error("aerial height must be positive");
    if (!map.bounds().contains(source.xy())) throw Error("scenario source outside map bounds");
    truth.validate();
  }
};

/// log10 of the 3D and (clamped) horizontal source-receiver distances.
struct LinkLogs {
  double log_d3;
  double log_d2;
};

inline LinkLogs link_logs(const Vec3& source, const Vec3& receiver) {
  const double d2 = std::max(horizontal_distance(source, receiver), kMinHorizontalDistance);
  const double dz = receiver.z - source.z;
  const double d3 = std::sqrt(d2 * d2 + dz * dz);
  return {std::log10(d3), std::log10(d2)};
}

inline double model_rss(const PropagationParams& p, const Vec3& source, const Vec3& receiver,
                        bool los) {
  const LinkLogs l = link_logs(source, receiver);
  return los ? p.a0 + p.b0 * l.log_d3 + p.c0 * l.log_d2
             : p.a1 + p.b1 * l.log_d3 + p.c1 * l.log_d2;
}

/// Exact dB-domain coefficients of the ground-truth channel.
inline PropagationParams truth_params(const PropagationTruth& t) {
  const double q = t.antenna_exponent;
  return {t.power_db, -10.0 * t.eta_los - 10.0 * q, 10.0 * q,
          t.power_db, -10.0 * t.eta_nlos - 10.0 * q, 10.0 * q};
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Random engine for one measurement index. Each index owns its stream, so
/// sets are independent of generation order and nest by prefix in M.
inline std::mt19937_64 measurement_stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(detail::splitmix64(detail::splitmix64(seed) ^ (index * 0xD6E8FEB86659FD93ull)));
}

inline Measurement generate_measurement(const Scenario& scenario, std::uint64_t seed,
                                        std::uint64_t index,
                                        const PropagationParams& params) {
  auto rng = measurement_stream(seed, index);
  const double half = scenario.map.bounds().half();
  std::uniform_real_distribution<double> coord(-half, half);
  std::normal_distribution<double> shadow(0.0, 1.0);
  Measurement m;
  m.position.x = coord(rng);
  m.position.y = coord(rng);
  m.position.z = scenario.aerial_height;
  const double z = shadow(rng);
  const bool los = classify_los(scenario.map, scenario.source, m.position);
  const double sigma = los ? scenario.truth.sigma_los : scenario.truth.sigma_nlos;
  m.rss_db = model_rss(params, scenario.source, m.position, los) + sigma * z;
  m.truth_los = los;
  return m;
}

inline MeasurementSet generate_measurements(const Scenario& scenario, std::size_t count,
                                            std::uint64_t seed) {
  if (count == 0) throw Error("generate_measurements: count must be >= 1");
  scenario.validate();
  const PropagationParams params = truth_params(scenario.truth);
  MeasurementSet out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(generate_measurement(scenario, seed, i, params));
  }
  return out;
}

inline std::vector<Vec3> positions_of(std::span<const Measurement> ms) {
  std::vector<Vec3> out;
  out.reserve(ms.size());
  for (const Measurement& m : ms) out.push_back(m.position);
  return out;
}

/// The reference setting used throughout the evaluation: 200 m square,
/// three quadrilateral buildings around a source at the origin.
inline Scenario reference_scenario(double building_height = 50.0) {
  std::vector<Building> b;
  b.emplace_back(std::vector<Vec2>{{10, 40}, {40, 20}, {30, 70}, {60, 30}}, building_height);
  b.emplace_back(std::vector<Vec2>{{80, -40}, {20, -80}, {60, -100}, {100, -100}}, building_height);
  b.emplace_back(std::vector<Vec2>{{-50, 20}, {-50, -20}, {-70, 10}, {-70, -10}}, building_height);
  Scenario s;
  s.map = EnvironmentMap2D(SquareBounds{200.0}, std::move(b));
  s.source = {0.0, 0.0, 0.0};
  s.aerial_height = 20.0;
  s.truth = PropagationTruth{};
  return s;
}

}  // namespace segloc
