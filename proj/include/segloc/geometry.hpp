#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "segloc/error.hpp"

namespace segloc {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec2 xy() const { return {x, y}; }

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }

inline double horizontal_distance(const Vec3& a, const Vec3& b) {
  return std::hypot(b.x - a.x, b.y - a.y);
}

inline double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y) +
                   (b.z - a.z) * (b.z - a.z));
}

// Maps any finite angle onto [0, 2*pi).
inline double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

/// Planar polar angle of (target - anchor), heights ignored, in [0, 2*pi).
/// A zero horizontal offset maps to 0 so the point falls in the sector
/// containing angle 0.
inline double azimuth(const Vec3& anchor, const Vec3& target) {
  const double dx = target.x - anchor.x;
  const double dy = target.y - anchor.y;
  if (dx == 0.0 && dy == 0.0) return 0.0;
  return wrap_angle(std::atan2(dy, dx));
}

/// Counter-clockwise convex hull (Andrew's monotone chain). Collinear and
/// duplicate points are dropped.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Vec2& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Vec2& p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

/// Convex building footprint, stored as its CCW hull.
class Footprint {
public:
  explicit Footprint(std::vector<Vec2> vertices) : hull_(convex_hull(std::move(vertices))) {
    if (hull_.size() < 3) throw Error("footprint needs at least 3 non-collinear vertices");
  }

  std::span<const Vec2> vertices() const { return hull_; }

  /// Strict interior test.
  bool contains(Vec2 p) const {
    for (std::size_t i = 0; i < hull_.size(); ++i) {
      const Vec2 a = hull_[i];
      const Vec2 b = hull_[(i + 1) % hull_.size()];
      if (cross(b - a, p - a) <= 0.0) return false;
    }
    return true;
  }

  /// Interior or boundary.
  bool covers(Vec2 p) const {
    for (std::size_t i = 0; i < hull_.size(); ++i) {
      const Vec2 a = hull_[i];
      const Vec2 b = hull_[(i + 1) % hull_.size()];
      if (cross(b - a, p - a) < 0.0) return false;
    }
    return true;
  }

  /// Parametric interval [t0, t1] within [0, 1] over which the segment
  /// a + t (b - a) lies in the open interior (Cyrus-Beck clipping).
  std::optional<std::pair<double, double>> clip(Vec2 a, Vec2 b) const {
    const Vec2 d = b - a;
    double t0 = 0.0;
    double t1 = 1.0;
    for (std::size_t i = 0; i < hull_.size(); ++i) {
      const Vec2 v = hull_[i];
      const Vec2 e = hull_[(i + 1) % hull_.size()] - v;
      // Inside edge i iff num + t * den > 0.
      const double num = cross(e, a - v);
      const double den = cross(e, d);
      if (den == 0.0) {
        if (num <= 0.0) return std::nullopt;
        continue;
      }
      const double t = -num / den;
      if (den > 0.0) {
        t0 = std::max(t0, t);
      } else {
        t1 = std::min(t1, t);
      }
      if (t0 >= t1) return std::nullopt;
    }
    return std::make_pair(t0, t1);
  }

  /// True if the two convex footprints share interior points (separating
  /// axis test over both edge sets; touching edges do not overlap).
  bool overlaps(const Footprint& other) const {
    auto separated_by = [](const Footprint& p, const Footprint& q) {
      const auto pv = p.vertices();
      for (std::size_t i = 0; i < pv.size(); ++i) {
        const Vec2 a = pv[i];
        const Vec2 e = pv[(i + 1) % pv.size()] - a;
        bool all_outside = true;
        for (const Vec2& w : q.vertices()) {
          if (cross(e, w - a) > 0.0) {
            all_outside = false;
            break;
          }
        }
        if (all_outside) return true;
      }
      return false;
    };
    return !separated_by(*this, other) && !separated_by(other, *this);
  }

private:
  std::vector<Vec2> hull_;
};

struct Building {
  Footprint footprint;
  double height;

  Building(std::vector<Vec2> vertices, double height_m)
      : footprint(std::move(vertices)), height(height_m) {
    if (!(height > 0.0) || !std::isfinite(height)) throw Error("building height must be positive");
  }
};

/// Axis-aligned square [-L/2, L/2]^2 centered on the origin.
struct SquareBounds {
  double side = 200.0;

  double half() const { return 0.5 * side; }
  bool contains(Vec2 p) const {
    return std::abs(p.x) <= half() && std::abs(p.y) <= half();
  }
};

/// Footprints only. This is the map view handed to the localizer: it carries
/// no heights.
class FootprintMap {
public:
  FootprintMap() = default;
  FootprintMap(SquareBounds bounds, std::vector<Footprint> footprints)
      : bounds_(bounds), footprints_(std::move(footprints)) {}

  SquareBounds bounds() const { return bounds_; }
  std::span<const Footprint> footprints() const { return footprints_; }

  bool blocked(Vec2 p) const {
    return std::any_of(footprints_.begin(), footprints_.end(),
                       [&](const Footprint& f) { return f.covers(p); });
  }

private:
  SquareBounds bounds_{};
  std::vector<Footprint> footprints_;
};

/// Buildings with heights: the simulator's ground-truth world.
class EnvironmentMap2D {
public:
  EnvironmentMap2D() = default;
  EnvironmentMap2D(SquareBounds bounds, std::vector<Building> buildings)
      : bounds_(bounds), buildings_(std::move(buildings)) {
    if (!(bounds_.side > 0.0)) throw Error("map side must be positive");
    for (std::size_t i = 0; i < buildings_.size(); ++i) {
      for (const Vec2& v : buildings_[i].footprint.vertices()) {
        if (!bounds_.contains(v)) throw Error("building footprint outside map bounds");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (buildings_[i].footprint.overlaps(buildings_[j].footprint)) {
          throw Error("building footprints overlap");
        }
      }
    }
  }

  SquareBounds bounds() const { return bounds_; }
  std::span<const Building> buildings() const { return buildings_; }

  FootprintMap footprints() const {
    std::vector<Footprint> fps;
    fps.reserve(buildings_.size());
    for (const Building& b : buildings_) fps.push_back(b.footprint);
    return {bounds_, std::move(fps)};
  }

private:
  SquareBounds bounds_{};
  std::vector<Building> buildings_;
};

/// Ground-truth line-of-sight test. The link is blocked iff the 3D segment
/// enters the interior of an extruded footprint below its roof. Height is
/// linear along the segment, so only the lower end of each clipped interval
/// needs checking.
inline bool classify_los(const EnvironmentMap2D& map, const Vec3& source, const Vec3& receiver) {
  if (source == receiver) throw Error("classify_los: degenerate segment");
  if (!map.bounds().contains(source.xy()) || !map.bounds().contains(receiver.xy())) {
    throw Error("classify_los: endpoint outside map bounds");
  }
  for (const Building& b : map.buildings()) {
    const auto span = b.footprint.clip(source.xy(), receiver.xy());
    if (!span) continue;
    const double z0 = source.z + span->first * (receiver.z - source.z);
    const double z1 = source.z + span->second * (receiver.z - source.z);
    if (std::min(z0, z1) < b.height) return false;
  }
  return true;
}

/// Azimuthal partition of measurement indices around an anchor.
/// Sector j spans [boundaries[j], boundaries[j+1]); the last sector wraps
/// through 2*pi. With no boundaries there is a single full-circle sector.
struct Sectorization {
  Vec3 anchor;
  std::vector<double> boundaries;
  std::vector<std::vector<std::size_t>> members;

  std::size_t sector_count() const { return members.size(); }

  /// Azimuth of the bisector of sector j. A lone full-circle sector without
  /// any boundary has no axis.
  std::optional<double> axis(std::size_t j) const {
    if (boundaries.empty()) return std::nullopt;
    if (boundaries.size() == 1) return wrap_angle(boundaries[0] + 0.5 * kTwoPi);
    const double lo = boundaries[j];
    const double hi = j + 1 < boundaries.size() ? boundaries[j + 1] : boundaries[0] + kTwoPi;
    return wrap_angle(0.5 * (lo + hi));
  }

  std::size_t sector_of(double angle) const {
    if (boundaries.size() <= 1) return 0;
    const auto it = std::upper_bound(boundaries.begin(), boundaries.end(), angle);
    if (it == boundaries.begin()) return boundaries.size() - 1;
    return static_cast<std::size_t>(it - boundaries.begin()) - 1;
  }
};

namespace detail {

struct Arc {
  double start;  // in [0, 2*pi)
  double end;    // start <= end, may exceed 2*pi
};

// Smallest arc holding every vertex direction. The anchor lies outside the
// footprint, so the subtended arc is shorter than pi.
inline Arc subtended_arc(const Vec3& anchor, const Footprint& fp) {
  const auto verts = fp.vertices();
  const double ref = azimuth(anchor, Vec3{verts[0].x, verts[0].y, 0.0});
  double lo = 0.0;
  double hi = 0.0;
  for (const Vec2& v : verts) {
    double d = azimuth(anchor, Vec3{v.x, v.y, 0.0}) - ref;
    if (d > std::numbers::pi) d -= kTwoPi;
    if (d <= -std::numbers::pi) d += kTwoPi;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  const double start = wrap_angle(ref + lo);
  return {start, start + (hi - lo)};
}

// Union of circular arcs. Returns an empty list when the union is the full
// circle.
inline std::vector<Arc> merge_arcs(std::vector<Arc> arcs) {
  if (arcs.empty()) return arcs;
  std::sort(arcs.begin(), arcs.end(), [](const Arc& a, const Arc& b) {
    return a.start < b.start || (a.start == b.start && a.end < b.end);
  });
  std::vector<Arc> merged{arcs.front()};
  for (std::size_t i = 1; i < arcs.size(); ++i) {
    if (arcs[i].start <= merged.back().end) {
      merged.back().end = std::max(merged.back().end, arcs[i].end);
    } else {
      merged.push_back(arcs[i]);
    }
  }
  // Close the wrap-around: an arc running past 2*pi may swallow leading arcs.
  while (merged.size() > 1 && merged.back().end >= merged.front().start + kTwoPi) {
    merged.back().end = std::max(merged.back().end, merged.front().end + kTwoPi);
    merged.erase(merged.begin());
  }
  if (merged.back().end - merged.back().start >= kTwoPi) return {};
  return merged;
}

}  // namespace detail

/// Where sector boundaries go relative to the merged building arcs.
enum class SectorRule {
  // One boundary at each edge of every merged arc: each building cluster's
  // angular shadow is its own sector and every gap between clusters is an
  // obstacle-free sector.
  shadow_edges,
  // One boundary at the middle of each gap: one sector per building cluster,
  // gaps split between neighbours.
  gap_midpoints,
};


/// Sector boundaries around an anchor, sorted in [0, 2*pi). Throws if the
/// anchor lies on or inside a footprint.
inline std::vector<double> sector_boundaries(const FootprintMap& map, const Vec3& anchor,
                                             SectorRule rule = SectorRule::shadow_edges) {
  std::vector<detail::Arc> arcs;
  arcs.reserve(map.footprints().size());
  for (const Footprint& fp : map.footprints()) {
    if (fp.covers(anchor.xy())) throw Error("sectorize: anchor inside a building footprint");
    arcs.push_back(detail::subtended_arc(anchor, fp));
  }
  const auto merged = detail::merge_arcs(std::move(arcs));
  std::vector<double> boundaries;
  boundaries.reserve(2 * merged.size());
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double gap_begin = merged[i].end;
    const double gap_end =
        i + 1 < merged.size() ? merged[i + 1].start : merged.front().start + kTwoPi;
    if (rule == SectorRule::gap_midpoints) {
      boundaries.push_back(wrap_angle(0.5 * (gap_begin + gap_end)));
    } else {
      boundaries.push_back(merged[i].start);
      boundaries.push_back(wrap_angle(gap_begin));
    }
  }
  std::sort(boundaries.begin(), boundaries.end());
  boundaries.erase(std::unique(boundaries.begin(), boundaries.end()), boundaries.end());
  return boundaries;
}

/// Partitions receiver positions into sectors around the anchor.
inline Sectorization sectorize(const FootprintMap& map, const Vec3& anchor,
                               std::span<const Vec3> positions,
                               SectorRule rule = SectorRule::shadow_edges) {
  Sectorization out{anchor, sector_boundaries(map, anchor, rule), {}};
  out.members.resize(std::max<std::size_t>(out.boundaries.size(), 1));
  for (std::size_t m = 0; m < positions.size(); ++m) {
    out.members[out.sector_of(azimuth(anchor, positions[m]))].push_back(m);
  }
  return out;
}

}  // namespace segloc
