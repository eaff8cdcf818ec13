#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string_view>

#include "segloc/error.hpp"
#include "segloc/geometry.hpp"
#include "segloc/propagation.hpp"

namespace segloc {

/// Weighted centroid localization. Weights are linear-scale RSS raised to
/// weight_exponent; los_only keeps only ground-truth LOS measurements.
struct WclConfig {
  double weight_exponent = 1.0;
  bool los_only = false;

  static WclConfig plain() { return {1.0, false}; }
  static WclConfig modified() { return {0.6, false}; }
  static WclConfig genius() { return {1.0, true}; }
};

inline Vec3 wcl(std::span<const Measurement> ms, const WclConfig& cfg) {
  if (!(cfg.weight_exponent > 0.0)) throw Error("wcl: weight exponent must be positive");

  auto qualifies = [&](const Measurement& m) {
    if (!cfg.los_only) return true;
    if (!m.truth_los) throw Error("wcl: LOS-only variant needs ground-truth labels");
    return *m.truth_los;
  };

  // w = (10^(rss/10))^p, evaluated relative to the strongest measurement so
  // the exponentials cannot underflow to all zeros.
  double peak = -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  for (const Measurement& m : ms) {
    if (!qualifies(m)) continue;
    peak = std::max(peak, m.rss_db);
    ++used;
  }
  if (used == 0) throw Error("wcl: no qualifying measurements");

  double wsum = 0.0, sx = 0.0, sy = 0.0;
  for (const Measurement& m : ms) {
    if (!qualifies(m)) continue;
    const double w = std::pow(10.0, cfg.weight_exponent * (m.rss_db - peak) / 10.0);
    wsum += w;
    sx += w * m.position.x;
    sy += w * m.position.y;
  }
  return {sx / wsum, sy / wsum, 0.0};
}

}  // namespace segloc
