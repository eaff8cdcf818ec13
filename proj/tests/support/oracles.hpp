// Reference implementations used only by the tests. They take the slow,
// obvious route so they can check the library's fast paths.
#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "segloc/segloc.hpp"

namespace oracle {

using segloc::Vec2;
using segloc::Vec3;

// Crossing-number point-in-polygon.
inline bool point_in_polygon(std::span<const Vec2> poly, Vec2 p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

// LOS by dense sampling. For each building, `samples` evenly spaced points
// cover the part of the segment whose horizontal trace lies in the
// building's bounding box; a point inside the footprint and below the roof
// blocks the link.
inline bool los_by_sampling(const segloc::EnvironmentMap2D& map, const Vec3& s, const Vec3& r,
                            std::size_t samples = 10000) {
  for (const segloc::Building& b : map.buildings()) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const Vec2& v : b.footprint.vertices()) {
      xmin = std::min(xmin, v.x);
      xmax = std::max(xmax, v.x);
      ymin = std::min(ymin, v.y);
      ymax = std::max(ymax, v.y);
    }
    double t0 = 0.0, t1 = 1.0;
    const double d[2] = {r.x - s.x, r.y - s.y};
    const double o[2] = {s.x, s.y};
    const double lo[2] = {xmin, ymin};
    const double hi[2] = {xmax, ymax};
    for (int k = 0; k < 2; ++k) {
      if (d[k] == 0.0) {
        if (o[k] < lo[k] || o[k] > hi[k]) t1 = -1.0;
        continue;
      }
      double a = (lo[k] - o[k]) / d[k];
      double c = (hi[k] - o[k]) / d[k];
      if (a > c) std::swap(a, c);
      t0 = std::max(t0, a);
      t1 = std::min(t1, c);
    }
    if (t1 < t0) continue;
    for (std::size_t i = 0; i < samples; ++i) {
      const double t = t0 + (t1 - t0) * (static_cast<double>(i) + 0.5) / static_cast<double>(samples);
      const Vec3 p{s.x + t * (r.x - s.x), s.y + t * (r.y - s.y), s.z + t * (r.z - s.z)};
      if (p.z < b.height && point_in_polygon(b.footprint.vertices(), p.xy())) return false;
    }
  }
  return true;
}

// Moore-Penrose pseudo-inverse solution via SVD.
struct PinvSolution {
  Eigen::VectorXd phi;
  double residual_sq;
};

inline PinvSolution pinv_solve(const Eigen::MatrixXd& d, const Eigen::VectorXd& y) {
  if (d.rows() == 0) return {Eigen::VectorXd::Zero(d.cols()), 0.0};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = std::max(d.rows(), d.cols()) * sv(0) * 1e-13;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol) inv(i) = 1.0 / sv(i);
  }
  Eigen::VectorXd phi = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * y;
  return {phi, (y - d * phi).squaredNorm()};
}

inline double elevation_angle(const Vec3& z, const Vec3& s, std::optional<double> axis) {
  const double dx = z.x - s.x;
  const double dy = z.y - s.y;
  const double horizontal = axis ? dx * std::cos(*axis) + dy * std::sin(*axis) : std::sqrt(dx * dx + dy * dy);
  return std::atan2(z.z - s.z, horizontal);
}

// Entry-by-entry design matrix (rows = measurements, 6 columns).
inline Eigen::MatrixXd naive_design(std::span<const segloc::Measurement> ms,
                                    std::span<const std::size_t> idx, const Vec3& s,
                                    const std::vector<bool>& los) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(idx.size()), 6);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const Vec3& z = ms[idx[i]].position;
    double d2 = std::sqrt((z.x - s.x) * (z.x - s.x) + (z.y - s.y) * (z.y - s.y));
    if (d2 < 1e-3) d2 = 1e-3;
    const double d3 = std::sqrt(d2 * d2 + (z.z - s.z) * (z.z - s.z));
    const double u0 = los[i] ? 1.0 : 0.0;
    const double u1 = 1.0 - u0;
    const auto r = static_cast<Eigen::Index>(i);
    d(r, 0) = u0;
    d(r, 1) = u0 * std::log10(d3);
    d(r, 2) = u0 * std::log10(d2);
    d(r, 3) = u1;
    d(r, 4) = u1 * std::log10(d3);
    d(r, 5) = u1 * std::log10(d2);
  }
  return d;
}

inline Eigen::VectorXd rss_vector(std::span<const segloc::Measurement> ms, std::span<const std::size_t> idx) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) y(static_cast<Eigen::Index>(i)) = ms[idx[i]].rss_db;
  return y;
}

inline double sector_residual(std::span<const segloc::Measurement> ms, std::span<const std::size_t> idx,
                              const Vec3& s, double alpha, std::optional<double> axis) {
  std::vector<bool> los(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) los[i] = elevation_angle(ms[idx[i]].position, s, axis) >= alpha;
  return pinv_solve(naive_design(ms, idx, s, los), rss_vector(ms, idx)).residual_sq;
}

struct CandidateReference {
  std::vector<double> best_alpha;
  double total = 0.0;
};

// Nested loops: sectors x candidate angles, each fit by SVD pseudo-inverse.
inline CandidateReference evaluate_candidate(const segloc::FootprintMap& map,
                                             std::span<const segloc::Measurement> ms, const Vec3& s,
                                             std::span<const segloc::SupportVectorAngle> cands,
                                             segloc::SectorRule rule = segloc::SectorRule::shadow_edges) {
  const auto sectors = segloc::sectorize(map, s, segloc::positions_of(ms), rule);
  CandidateReference out;
  for (std::size_t j = 0; j < sectors.sector_count(); ++j) {
    double best = 0.0;
    double best_alpha = 0.0;
    for (std::size_t b = 0; b < cands.size(); ++b) {
      const double r = sectors.members[j].empty()
                           ? 0.0
                           : sector_residual(ms, sectors.members[j], s, cands[b].alpha, sectors.axis(j));
      if (b == 0 || r < best || (r == best && cands[b].alpha < best_alpha)) {
        best = r;
        best_alpha = cands[b].alpha;
      }
    }
    out.best_alpha.push_back(best_alpha);
    out.total += best;
  }
  return out;
}

// Does the ray from p at angle theta hit the polygon? Tested edge by edge.
inline bool ray_hits_polygon(Vec2 p, double theta, std::span<const Vec2> poly) {
  const Vec2 d{std::cos(theta), std::sin(theta)};
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 a = poly[i];
    const Vec2 b = poly[(i + 1) % poly.size()];
    const Vec2 e{b.x - a.x, b.y - a.y};
    const double den = d.x * e.y - d.y * e.x;
    if (std::abs(den) < 1e-15) continue;
    const Vec2 w{a.x - p.x, a.y - p.y};
    const double t = (w.x * e.y - w.y * e.x) / den;  // along ray
    const double u = (w.x * d.y - w.y * d.x) / den;  // along edge
    if (t > 0.0 && u >= 0.0 && u <= 1.0) return true;
  }
  return false;
}

// Angular coverage by footprints sampled on a fine circle; returns the
// number of maximal covered runs (circularly).
inline std::size_t covered_runs(const segloc::FootprintMap& map, const Vec3& anchor,
                                std::size_t samples = 36000, std::vector<char>* mask_out = nullptr) {
  std::vector<char> mask(samples, 0);
  for (std::size_t k = 0; k < samples; ++k) {
    const double th = segloc::kTwoPi * (static_cast<double>(k) + 0.5) / static_cast<double>(samples);
    for (const segloc::Footprint& f : map.footprints()) {
      if (ray_hits_polygon(anchor.xy(), th, f.vertices())) {
        mask[k] = 1;
        break;
      }
    }
  }
  std::size_t runs = 0;
  for (std::size_t k = 0; k < samples; ++k) {
    if (mask[k] && !mask[(k + samples - 1) % samples]) ++runs;
  }
  if (runs == 0 && samples > 0 && mask[0]) runs = 1;  // full circle
  if (mask_out) *mask_out = std::move(mask);
  return runs;
}

// Random convex polygon: points on a jittered circle, hulled.
inline std::vector<Vec2> random_convex(std::mt19937_64& rng, Vec2 center, double radius) {
  std::uniform_real_distribution<double> ang(0.0, segloc::kTwoPi);
  std::uniform_real_distribution<double> rad(0.5, 1.0);
  std::uniform_int_distribution<int> count(3, 8);
  std::vector<Vec2> pts;
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double a = ang(rng);
    const double r = radius * rad(rng);
    pts.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
  }
  return pts;
}

// Map with up to `count` non-overlapping random convex buildings.
inline segloc::EnvironmentMap2D random_map(std::mt19937_64& rng, double side, std::size_t count,
                                           double min_h = 5.0, double max_h = 80.0) {
  std::uniform_real_distribution<double> c(-0.38 * side, 0.38 * side);
  std::uniform_real_distribution<double> r(0.03 * side, 0.12 * side);
  std::uniform_real_distribution<double> h(min_h, max_h);
  std::vector<segloc::Building> bs;
  for (std::size_t tries = 0; bs.size() < count && tries < 50 * count; ++tries) {
    segloc::Building cand(random_convex(rng, {c(rng), c(rng)}, r(rng)), h(rng));
    bool ok = true;
    for (const auto& b : bs) {
      if (b.footprint.overlaps(cand.footprint)) ok = false;
    }
    if (ok) bs.push_back(std::move(cand));
  }
  return segloc::EnvironmentMap2D(segloc::SquareBounds{side}, std::move(bs));
}

}  // namespace oracle
