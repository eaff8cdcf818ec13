// Shared test scenarios.
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segloc/segloc.hpp"

namespace fixture {

struct ConsistentSet {
  segloc::MeasurementSet measurements;
  segloc::Sectorization sectors;                      // at the true source
  std::vector<segloc::SupportVectorAngle> true_svs;  // one per sector
  std::size_t dropped = 0;
};

// Noiseless measurements whose LOS labels are exactly reproduced by one
// candidate angle per sector at the true source. Per sector the angle that
// agrees with the most truth labels is chosen and the disagreeing
// measurements are dropped.
inline ConsistentSet consistent_noiseless_set(segloc::Scenario scenario, std::size_t count,
                                              std::uint64_t seed,
                                              std::span<const segloc::SupportVectorAngle> candidates,
                                              segloc::SectorRule rule = segloc::SectorRule::shadow_edges) {
  using namespace segloc;
  scenario.truth.sigma_los = 0.0;
  scenario.truth.sigma_nlos = 0.0;
  const MeasurementSet all = generate_measurements(scenario, count, seed);
  const FootprintMap map = scenario.map.footprints();
  const Sectorization sectors = sectorize(map, scenario.source, positions_of(all), rule);

  std::vector<char> keep(all.size(), 0);
  ConsistentSet out;
  for (std::size_t j = 0; j < sectors.sector_count(); ++j) {
    std::size_t best_agree = 0;
    SupportVectorAngle best = candidates.front();
    for (const SupportVectorAngle& sv : candidates) {
      std::size_t agree = 0;
      for (std::size_t m : sectors.members[j]) {
        agree += indicator(all[m].position, scenario.source, sv, sectors.axis(j)) == *all[m].truth_los;
      }
      if (agree > best_agree) {
        best_agree = agree;
        best = sv;
      }
    }
    out.true_svs.push_back(best);
    for (std::size_t m : sectors.members[j]) {
      keep[m] = indicator(all[m].position, scenario.source, best, sectors.axis(j)) == *all[m].truth_los;
    }
  }
  for (std::size_t m = 0; m < all.size(); ++m) {
    if (keep[m]) {
      out.measurements.push_back(all[m]);
    } else {
      ++out.dropped;
    }
  }
  out.sectors = sectorize(map, scenario.source, positions_of(out.measurements), rule);
  return out;
}

}  // namespace fixture
