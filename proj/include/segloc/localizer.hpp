#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "segloc/error.hpp"
#include "segloc/geometry.hpp"
#include "segloc/parallel.hpp"
#include "segloc/propagation.hpp"
#include "segloc/segreg.hpp"

namespace segloc {

struct SearchArea {
  double xmin = -100.0, xmax = 100.0;
  double ymin = -100.0, ymax = 100.0;
};

/// Candidate source grid plus the support-vector angles tried in every
/// sector. With refine_spacing set, a second pass runs at that spacing over
/// +-spacing around the coarse winner.
struct GridSpec {
  double spacing = 5.0;
  SearchArea area;
  std::vector<SupportVectorAngle> sv_candidates = default_sv_candidates();
  std::optional<double> refine_spacing;
  SectorRule sector_rule = SectorRule::shadow_edges;

  static GridSpec covering(SquareBounds b, double spacing, std::optional<double> refine = {},
                           std::size_t nb = 31) {
    GridSpec g;
    g.spacing = spacing;
    g.area = {-b.half(), b.half(), -b.half(), b.half()};
    g.sv_candidates = default_sv_candidates(nb);
    g.refine_spacing = refine;
    return g;
  }

  void validate() const {
    if (!(spacing > 0.0)) throw Error("grid spacing must be positive");
    if (sv_candidates.empty()) throw Error("grid needs at least one support vector candidate");
    if (!(area.xmax >= area.xmin) || !(area.ymax >= area.ymin)) throw Error("empty search area");
    if (refine_spacing && !(*refine_spacing > 0.0 && *refine_spacing < spacing)) {
      throw Error("refine spacing must be positive and finer than the coarse spacing");
    }
  }

  /// Row-major over y then x, at ground height.
  std::vector<Vec3> points() const {
    const auto nx = static_cast<std::size_t>(std::floor((area.xmax - area.xmin) / spacing + 1e-9)) + 1;
    const auto ny = static_cast<std::size_t>(std::floor((area.ymax - area.ymin) / spacing + 1e-9)) + 1;
    std::vector<Vec3> out;
    out.reserve(nx * ny);
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t ix = 0; ix < nx; ++ix) {
        out.push_back({area.xmin + static_cast<double>(ix) * spacing,
                       area.ymin + static_cast<double>(iy) * spacing, 0.0});
      }
    }
    return out;
  }
};

/// Points at `fine` spacing within +-`radius` of `center`, clipped to the
/// area. The center itself is always included.
inline std::vector<Vec3> refinement_points(const Vec3& center, double radius, double fine,
                                           const SearchArea& area) {
  const auto n = static_cast<long>(std::floor(radius / fine + 1e-9));
  std::vector<Vec3> out;
  for (long iy = -n; iy <= n; ++iy) {
    for (long ix = -n; ix <= n; ++ix) {
      const Vec3 p{center.x + static_cast<double>(ix) * fine,
                   center.y + static_cast<double>(iy) * fine, 0.0};
      if (p.x < area.xmin || p.x > area.xmax || p.y < area.ymin || p.y > area.ymax) continue;
      out.push_back(p);
    }
  }
  return out;
}

struct CandidateEvaluation {
  Vec3 source;
  Sectorization sectors;
  std::vector<SupportVectorAngle> sv_hats;
  std::vector<double> sector_residuals;
  double total_residual = 0.0;
  // residual_table[j][b]: sector j, candidate angle b. Filled on request.
  std::vector<std::vector<double>> residual_table;
};

/// Sectorizes at s, picks the best angle per sector, and sums the sector
/// minima. Returns nullopt when s lies on or inside a footprint.
inline std::optional<CandidateEvaluation> evaluate_candidate(
    const FootprintMap& map, std::span<const Measurement> ms, std::span<const Vec3> positions,
    const Vec3& s, std::span<const SupportVectorAngle> candidates,
    SectorRule rule = SectorRule::shadow_edges, bool keep_table = false) {
  if (candidates.empty()) throw Error("evaluate_candidate: empty candidate list");
  if (map.blocked(s.xy())) return std::nullopt;
  CandidateEvaluation out;
  out.source = s;
  out.sectors = sectorize(map, s, positions, rule);
  for (std::size_t j = 0; j < out.sectors.sector_count(); ++j) {
    SectorProblem problem(ms, out.sectors.members[j], s, out.sectors.axis(j));
    SupportVectorChoice choice = best_support_vector(problem, candidates);
    out.sv_hats.push_back(choice.sv);
    out.sector_residuals.push_back(choice.residual_sq);
    out.total_residual += choice.residual_sq;
    if (keep_table) out.residual_table.push_back(std::move(choice.residuals));
  }
  return out;
}

inline std::optional<CandidateEvaluation> evaluate_candidate(
    const FootprintMap& map, std::span<const Measurement> ms, const Vec3& s,
    std::span<const SupportVectorAngle> candidates, SectorRule rule = SectorRule::shadow_edges) {
  const auto positions = positions_of(ms);
  return evaluate_candidate(map, ms, positions, s, candidates, rule);
}

/// Global coefficient fit over all measurements, each labeled by the angle
/// of its own sector.
inline SectorFit refit_global(std::span<const Measurement> ms, const Sectorization& sectors,
                              std::span<const SupportVectorAngle> sv_hats) {
  if (sv_hats.size() != sectors.sector_count()) {
    throw Error("refit_global: need one support vector per sector");
  }
  std::vector<std::size_t> indices;
  std::vector<bool> labels;
  indices.reserve(ms.size());
  labels.reserve(ms.size());
  for (std::size_t j = 0; j < sectors.sector_count(); ++j) {
    for (std::size_t m : sectors.members[j]) {
      indices.push_back(m);
      labels.push_back(indicator(ms[m].position, sectors.anchor, sv_hats[j], sectors.axis(j)));
    }
  }
  const Design d = build_design(ms, indices, sectors.anchor, labels);
  return solve_ls(d.matrix, d.rss);
}

/// Materialized error tensor: one entry per admissible candidate, ragged in
/// the sector count.
struct ErrorTensor {
  struct Entry {
    Vec3 source;
    std::vector<double> boundaries;
    std::vector<std::vector<double>> residuals;  // [sector][angle]
  };
  std::vector<SupportVectorAngle> angles;
  std::vector<Entry> entries;
};

struct LocalizationResult {
  Vec3 s_hat;
  std::vector<double> sector_boundaries;
  std::vector<SupportVectorAngle> sv_hats;
  PropagationParams phi_hat;
  double total_residual = 0.0;
  double refit_residual = 0.0;
  std::vector<double> per_sector_residuals;
  std::size_t candidate_count = 0;
  std::size_t excluded_count = 0;
  Vec3 coarse_s_hat;
  double coarse_total_residual = 0.0;
  // Number of candidates whose residual ties the minimum (up to round-off);
  // > 1 means the data do not pin the source down (e.g. too few measurements).
  std::size_t minimizer_count = 0;

  bool degenerate() const { return minimizer_count > 1; }
};

struct LocalizeOptions {
  std::size_t threads = default_thread_count();
  ErrorTensor* tensor = nullptr;
};

namespace detail {

struct StageWinner {
  Vec3 s;
  double total = std::numeric_limits<double>::infinity();
  std::size_t admissible = 0;
  std::size_t excluded = 0;
  std::size_t ties = 0;
};

// Candidates within this relative distance of the minimum count as ties
// when judging whether the estimate is unique.
inline constexpr double kTieTolerance = 1e-9;

inline bool better(double e, const Vec3& p, double best_e, const Vec3& best_p) {
  if (e != best_e) return e < best_e;
  if (p.x != best_p.x) return p.x < best_p.x;
  return p.y < best_p.y;
}

inline StageWinner search_stage(const FootprintMap& map, std::span<const Measurement> ms,
                                std::span<const Vec3> positions, std::span<const Vec3> points,
                                const GridSpec& grid, const LocalizeOptions& opt) {
  constexpr double kExcluded = -1.0;
  std::vector<double> totals(points.size(), kExcluded);
  std::vector<std::optional<CandidateEvaluation>> kept(opt.tensor ? points.size() : 0);
  parallel_for(points.size(), opt.threads, [&](std::size_t i) {
    auto ev = evaluate_candidate(map, ms, positions, points[i], grid.sv_candidates,
                                 grid.sector_rule, opt.tensor != nullptr);
    if (!ev) return;
    totals[i] = ev->total_residual;
    if (opt.tensor) kept[i] = std::move(ev);
  });

  // Sequential reduction in point order keeps the result independent of the
  // worker count.
  StageWinner w;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (totals[i] == kExcluded) {
      ++w.excluded;
      continue;
    }
    ++w.admissible;
    if (w.admissible == 1 || better(totals[i], points[i], w.total, w.s)) {
      w.total = totals[i];
      w.s = points[i];
    }
  }
  for (double e : totals) {
    if (e != kExcluded && e - w.total <= kTieTolerance * std::max(1.0, w.total)) ++w.ties;
  }
  if (opt.tensor) {
    for (auto& ev : kept) {
      if (!ev) continue;
      opt.tensor->entries.push_back(
          {ev->source, ev->sectors.boundaries, std::move(ev->residual_table)});
    }
  }
  return w;
}

}  // namespace detail

/// Exhaustive residual-minimizing search over the candidate grid, then one
/// global refit of the coefficients at the winner.
inline LocalizationResult localize(const FootprintMap& map, std::span<const Measurement> ms,
                                   const GridSpec& grid, const LocalizeOptions& opt = {}) {
  grid.validate();
  if (opt.tensor) {
    opt.tensor->angles = grid.sv_candidates;
    opt.tensor->entries.clear();
  }
  const auto positions = positions_of(ms);
  const auto coarse_points = grid.points();
  const detail::StageWinner coarse =
      detail::search_stage(map, ms, positions, coarse_points, grid, opt);
  if (coarse.admissible == 0) throw Error("localize: no admissible grid candidates");

  LocalizationResult r;
  r.coarse_s_hat = coarse.s;
  r.coarse_total_residual = coarse.total;
  r.candidate_count = coarse.admissible;
  r.excluded_count = coarse.excluded;
  detail::StageWinner best = coarse;

  if (grid.refine_spacing) {
    const auto fine_points =
        refinement_points(coarse.s, grid.spacing, *grid.refine_spacing, grid.area);
    const detail::StageWinner fine =
        detail::search_stage(map, ms, positions, fine_points, grid, opt);
    r.candidate_count += fine.admissible;
    r.excluded_count += fine.excluded;
    // The fine grid contains the coarse winner, so fine.total <= coarse.total.
    if (fine.admissible > 0) best = fine;
  }

  const auto ev =
      evaluate_candidate(map, ms, positions, best.s, grid.sv_candidates, grid.sector_rule);
  r.s_hat = best.s;
  r.total_residual = ev->total_residual;
  r.per_sector_residuals = ev->sector_residuals;
  r.sv_hats = ev->sv_hats;
  r.sector_boundaries = ev->sectors.boundaries;
  r.minimizer_count = best.ties;
  const SectorFit global = refit_global(ms, ev->sectors, ev->sv_hats);
  r.phi_hat = global.phi;
  r.refit_residual = global.residual_sq;
  return r;
}

}  // namespace segloc
