#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "segloc/error.hpp"
#include "segloc/geometry.hpp"
#include "segloc/propagation.hpp"

namespace segloc {

/// Critical elevation angle of the LOS/NLOS separating plane through the
/// presumed source. Receivers at or above the angle are classified LOS.
struct SupportVectorAngle {
  double alpha = 0.0;

  explicit SupportVectorAngle(double a = 0.0) : alpha(a) {
    if (!(alpha >= 0.0 && alpha <= std::numbers::pi / 2)) {
      throw Error("support vector angle must lie in [0, pi/2]");
    }
  }

  friend bool operator==(const SupportVectorAngle&, const SupportVectorAngle&) = default;
};

/// Evenly spaced angles over [0, pi/2], endpoints included. 0 labels every
/// elevated receiver LOS and pi/2 labels everything NLOS.
inline std::vector<SupportVectorAngle> default_sv_candidates(std::size_t count = 31) {
  if (count < 2) throw Error("need at least two support vector candidates");
  std::vector<SupportVectorAngle> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double a = (std::numbers::pi / 2) * static_cast<double>(i) / static_cast<double>(count - 1);
    out.emplace_back(i + 1 == count ? std::numbers::pi / 2 : std::min(a, std::numbers::pi / 2));
  }
  return out;
}

/// Horizontal direction (azimuth) of a sector's separating plane normal.
/// The plane passes through the source and its normal lies in the vertical
/// plane along this direction, so at a fixed receiver height the LOS/NLOS
/// boundary is a straight line across the sector. Without an axis every
/// receiver is measured along its own radial direction.
using SectorAxis = std::optional<double>;

/// Horizontal offset of the receiver along the axis (radial distance when
/// no axis is given).
inline double axial_offset(const Vec3& receiver, const Vec3& source, SectorAxis axis) {
  if (!axis) return horizontal_distance(source, receiver);
  return std::cos(*axis) * (receiver.x - source.x) + std::sin(*axis) * (receiver.y - source.y);
}

/// Elevation of the receiver seen from the source, measured in the vertical
/// plane of the axis. Lies in (0, pi) for receivers above the source.
inline double elevation(const Vec3& receiver, const Vec3& source, SectorAxis axis = {}) {
  return std::atan2(receiver.z - source.z, axial_offset(receiver, source, axis));
}

/// LOS (true) iff the receiver sits on or above the separating plane.
inline bool indicator(const Vec3& receiver, const Vec3& source, SupportVectorAngle sv,
                      SectorAxis axis = {}) {
  return elevation(receiver, source, axis) >= sv.alpha;
}

/// One row per measurement, columns ordered as [a0 b0 c0 a1 b1 c1].
using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, 6>;

struct Design {
  DesignMatrix matrix;
  Eigen::VectorXd rss;
};

inline void fill_design_row(DesignMatrix& d, Eigen::Index row, const LinkLogs& l, bool los) {
  const Eigen::Index off = los ? 0 : 3;
  d.row(row).setZero();
  d(row, off) = 1.0;
  d(row, off + 1) = l.log_d3;
  d(row, off + 2) = l.log_d2;
}

/// Design for explicit labels (one per index, true = LOS).
inline Design build_design(std::span<const Measurement> ms, std::span<const std::size_t> indices,
                           const Vec3& source, const std::vector<bool>& los) {
  if (los.size() != indices.size()) throw Error("build_design: label count mismatch");
  const auto n = static_cast<Eigen::Index>(indices.size());
  Design out{DesignMatrix(n, 6), Eigen::VectorXd(n)};
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Measurement& m = ms[indices[i]];
    const auto row = static_cast<Eigen::Index>(i);
    fill_design_row(out.matrix, row, link_logs(source, m.position), los[i]);
    out.rss(row) = m.rss_db;
  }
  return out;
}

/// Design for the labeling induced by a support vector.
inline Design build_design(std::span<const Measurement> ms, std::span<const std::size_t> indices,
                           const Vec3& source, SupportVectorAngle sv, SectorAxis axis = {}) {
  std::vector<bool> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    labels[i] = indicator(ms[indices[i]].position, source, sv, axis);
  }
  return build_design(ms, indices, source, labels);
}

struct SectorFit {
  PropagationParams phi;
  double residual_sq = 0.0;
  std::size_t n_los = 0;
  std::size_t n_nlos = 0;
};

/// Minimum-norm least squares via complete orthogonal decomposition.
/// Columns that no row touches come out exactly zero.
inline SectorFit solve_ls(const DesignMatrix& d, const Eigen::VectorXd& y) {
  if (d.rows() != y.size()) throw Error("solve_ls: dimension mismatch");
  SectorFit fit;
  for (Eigen::Index r = 0; r < d.rows(); ++r) {
    (d(r, 0) != 0.0 ? fit.n_los : fit.n_nlos) += 1;
  }
  if (d.rows() == 0) return fit;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(d);
  Eigen::Matrix<double, 6, 1> phi = cod.solve(y);
  for (int c = 0; c < 6; ++c) {
    if (d.col(c).isZero(0.0)) phi(c) = 0.0;
  }
  fit.residual_sq = (y - d * phi).squaredNorm();
  fit.phi = PropagationParams{phi(0), phi(1), phi(2), phi(3), phi(4), phi(5)};
  return fit;
}

/// Precomputed regression rows for one sector at one presumed source.
/// Rows are held in decreasing elevation, so every support-vector labeling
/// is a split into a LOS prefix and an NLOS suffix. The six-column problem
/// is block diagonal under that split and is solved as two three-column
/// problems.
class SectorProblem {
public:
  SectorProblem(std::span<const Measurement> ms, std::span<const std::size_t> indices,
                const Vec3& source, SectorAxis axis = {}) {
    const auto n = indices.size();
    std::vector<std::size_t> order(n);
    std::vector<double> elev(n);
    for (std::size_t i = 0; i < n; ++i) elev[i] = elevation(ms[indices[i]].position, source, axis);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return elev[a] > elev[b]; });

    rows_.resize(static_cast<Eigen::Index>(n), 3);
    rss_.resize(static_cast<Eigen::Index>(n));
    elevations_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = order[i];
      const LinkLogs l = link_logs(source, ms[indices[k]].position);
      const auto r = static_cast<Eigen::Index>(i);
      rows_(r, 0) = 1.0;
      rows_(r, 1) = l.log_d3;
      rows_(r, 2) = l.log_d2;
      rss_(r) = ms[indices[k]].rss_db;
      elevations_[i] = elev[k];
    }
    cache_.assign(n + 1, -1.0);
  }

  std::size_t size() const { return elevations_.size(); }

  /// Number of rows labeled LOS under the given angle.
  std::size_t los_count(SupportVectorAngle sv) const {
    // elevations_ is decreasing; count those >= alpha.
    const auto it = std::partition_point(elevations_.begin(), elevations_.end(),
                                         [&](double e) { return e >= sv.alpha; });
    return static_cast<std::size_t>(it - elevations_.begin());
  }

  /// Residual of the fit with the first n_los rows LOS. Memoized: equal
  /// labelings return the identical value.
  double residual_for_split(std::size_t n_los) {
    double& slot = cache_.at(n_los);
    if (slot < 0.0) slot = fit_split(n_los).residual_sq;
    return slot;
  }

  double residual(SupportVectorAngle sv) { return residual_for_split(los_count(sv)); }

  SectorFit fit_split(std::size_t n_los) const {
    const auto n = static_cast<Eigen::Index>(size());
    const auto k = static_cast<Eigen::Index>(n_los);
    SectorFit fit;
    fit.n_los = n_los;
    fit.n_nlos = size() - n_los;
    const Block los = solve_block(rows_.topRows(k), rss_.head(k));
    const Block nlos = solve_block(rows_.bottomRows(n - k), rss_.tail(n - k));
    fit.phi = PropagationParams{los.coef(0),  los.coef(1),  los.coef(2),
                                nlos.coef(0), nlos.coef(1), nlos.coef(2)};
    fit.residual_sq = los.residual_sq + nlos.residual_sq;
    return fit;
  }

private:
  struct Block {
    Eigen::Vector3d coef = Eigen::Vector3d::Zero();
    double residual_sq = 0.0;
  };

  template <class Rows, class Rhs>
  static Block solve_block(const Rows& a, const Rhs& y) {
    Block b;
    if (a.rows() == 0) return b;
    Eigen::CompleteOrthogonalDecomposition<Eigen::Matrix<double, Eigen::Dynamic, 3>> cod(a);
    b.coef = cod.solve(y);
    b.residual_sq = (y - a * b.coef).squaredNorm();
    return b;
  }

  Eigen::Matrix<double, Eigen::Dynamic, 3> rows_;
  Eigen::VectorXd rss_;
  std::vector<double> elevations_;
  std::vector<double> cache_;
};

/// r(s, b_j) for one sector. Empty sectors contribute 0.
inline double sector_residual(std::span<const Measurement> ms, std::span<const std::size_t> indices,
                              const Vec3& source, SupportVectorAngle sv, SectorAxis axis = {}) {
  if (indices.empty()) return 0.0;
  SectorProblem p(ms, indices, source, axis);
  return p.residual(sv);
}

struct SupportVectorChoice {
  SupportVectorAngle sv;
  double residual_sq = 0.0;
  std::vector<double> residuals;  // one per candidate, in candidate order
};

/// Scans candidates; ties go to the smallest angle.
inline SupportVectorChoice best_support_vector(SectorProblem& problem,
                                               std::span<const SupportVectorAngle> candidates) {
  if (candidates.empty()) throw Error("best_support_vector: empty candidate list");
  SupportVectorChoice out{candidates.front(), 0.0, {}};
  out.residuals.reserve(candidates.size());
  bool first = true;
  for (const SupportVectorAngle& sv : candidates) {
    const double r = problem.size() == 0 ? 0.0 : problem.residual(sv);
    out.residuals.push_back(r);
    if (first || r < out.residual_sq || (r == out.residual_sq && sv.alpha < out.sv.alpha)) {
      out.sv = sv;
      out.residual_sq = r;
      first = false;
    }
  }
  return out;
}

inline SupportVectorChoice best_support_vector(std::span<const Measurement> ms,
                                               std::span<const std::size_t> indices,
                                               const Vec3& source,
                                               std::span<const SupportVectorAngle> candidates,
                                               SectorAxis axis = {}) {
  SectorProblem p(ms, indices, source, axis);
  return best_support_vector(p, candidates);
}

}  // namespace segloc
