#pragma once

// Region tests R1/R2/R3, critical-point classification of f, the known
// critical set of g, and Monte Carlo coverage of R1 u R2 u R3.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tpr/complex_embed.hpp"
#include "tpr/ensemble.hpp"
#include "tpr/objective.hpp"
#include "tpr/random.hpp"
#include "tpr/types.hpp"

namespace tpr {

/// delta0, C1 and C2 are the region constants; c scales g.
template <typename Scalar>
struct LandscapeConfig {
  Scalar delta0 = Scalar(1e-4);
  Scalar c1 = Scalar(40);
  Scalar c2 = Scalar(120);
  Scalar c = Scalar(1);
  Scalar grad_tol = Scalar(1e-8);
  Scalar eig_tol = Scalar(1e-8);
  Scalar dist_tol = Scalar(1e-6);
  Index dense_cap = kDefaultDenseHessianCap;

  void validate() const {
    if (!(delta0 > 0) || !(c1 > 0) || !(c2 > 0) || !(c > 0))
      throw std::invalid_argument("LandscapeConfig: delta0, C1, C2 and c must be positive");
    if (grad_tol < 0 || eig_tol < 0 || dist_tol < 0)
      throw std::invalid_argument("LandscapeConfig: tolerances must be nonnegative");
  }
  bool r2_nonempty() const { return 4 - c2 * delta0 / 4 > 0; }
  bool r3_nonempty() const { return 16 - 5 * c2 * delta0 > 0; }

  /// Relative-distance radius of R3, including the min(1, .) guard.
  Scalar r3_radius() const { return std::min(Scalar(1), (16 - 5 * c2 * delta0) / (192 + 4 * c2 * delta0)); }
};

template <typename Scalar>
LandscapeConfig<Scalar> config_for(const ProblemInstance<Scalar>& inst, LandscapeConfig<Scalar> cfg = {}) {
  cfg.c = inst.ensemble.c();
  return cfg;
}

/// Membership plus the two sides of the defining inequality (lhs <= rhs).
template <typename Scalar>
struct RegionTest {
  bool member;
  Scalar lhs;
  Scalar rhs;
};

/// (||x|| + ||x_gt||)^3 <= ||grad g(x+)|| / (C1 delta0 c).
template <typename Scalar, typename DerivedX, typename DerivedG>
RegionTest<Scalar> in_region1(const Eigen::MatrixBase<DerivedX>& x_plus, const Eigen::MatrixBase<DerivedG>& gt_plus,
                              const LandscapeConfig<Scalar>& cfg) {
  cfg.validate();
  const Scalar lhs = std::pow(x_plus.norm() + gt_plus.norm(), Scalar(3));
  const Scalar rhs = g_grad(x_plus, gt_plus, cfg.c).norm() / (cfg.c1 * cfg.delta0 * cfg.c);
  return {lhs <= rhs, lhs, rhs};
}

/// 8|<x,g>|^2/||g||^4 + (4 + delta0 C2/4) ||x||^2/||g||^2 <= 4 - delta0 C2/4.
template <typename Scalar, typename DerivedX, typename DerivedG>
RegionTest<Scalar> in_region2(const Eigen::MatrixBase<DerivedX>& x_plus, const Eigen::MatrixBase<DerivedG>& gt_plus,
                              const LandscapeConfig<Scalar>& cfg) {
  cfg.validate();
  const Scalar gg = gt_plus.squaredNorm();
  if (gg == Scalar(0)) throw std::invalid_argument("in_region2: zero ground truth");
  const Scalar shift = cfg.delta0 * cfg.c2 / 4;
  const Scalar lhs = 8 * embedded_overlap_sq(x_plus, gt_plus) / (gg * gg) + (4 + shift) * x_plus.squaredNorm() / gg;
  const Scalar rhs = 4 - shift;
  return {lhs <= rhs, lhs, rhs};
}

/// d(x, G) / ||x_gt|| <= (16 - 5 C2 delta0) / (192 + 4 C2 delta0), capped at 1.
template <typename Scalar, typename DerivedX, typename DerivedG>
RegionTest<Scalar> in_region3(const Eigen::MatrixBase<DerivedX>& x_plus, const Eigen::MatrixBase<DerivedG>& gt_plus,
                              const LandscapeConfig<Scalar>& cfg) {
  cfg.validate();
  const Scalar g_norm = gt_plus.norm();
  if (g_norm == Scalar(0)) throw std::invalid_argument("in_region3: zero ground truth");
  const Scalar lhs = embedded_dist_to_orbit(x_plus, gt_plus) / g_norm;
  const Scalar rhs = cfg.r3_radius();
  return {cfg.r3_nonempty() && lhs <= rhs, lhs, rhs};
}

enum class PointClass { NotCritical, StrictSaddleCandidate, GlobalMinimum, Unresolved };

constexpr std::string_view to_string(PointClass c) {
  switch (c) {
    case PointClass::NotCritical: return "NotCritical";
    case PointClass::StrictSaddleCandidate: return "StrictSaddleCandidate";
    case PointClass::GlobalMinimum: return "GlobalMinimum";
    case PointClass::Unresolved: return "Unresolved";
  }
  return "Unknown";
}

template <typename Scalar>
struct RegionReport {
  bool in_r1 = false;
  bool in_r2 = false;
  bool in_r3 = false;
  Scalar grad_g_norm = 0;
  Scalar grad_f_norm = 0;
  Scalar critical_threshold = 0;
  Scalar saddle_witness = 0;              // (g+)^T H_f(x) g+
  std::optional<Scalar> min_hess_eig;     // restricted to the orbit-tangent complement
  Scalar hess_scale = 0;                  // spectral norm of H_f(x)
  Scalar orbit_dist_rel = 0;
  PointClass classification = PointClass::Unresolved;
};

namespace detail {

/// Orthonormal basis of the complement of `direction` (or the identity if the
/// direction is zero).
template <typename Scalar>
DenseMatrix<Scalar> complement_basis(const RealVector<Scalar>& direction) {
  const Index d = direction.size();
  if (direction.norm() == Scalar(0)) return DenseMatrix<Scalar>::Identity(d, d);
  Eigen::HouseholderQR<DenseMatrix<Scalar>> qr(direction);
  const DenseMatrix<Scalar> Q = qr.householderQ() * DenseMatrix<Scalar>::Identity(d, d);
  return Q.rightCols(d - 1);
}

}  // namespace detail

/// Extreme eigenvalues of a symmetric operator by power iteration, with an
/// optional direction projected out. Returns {smallest, spectral radius}.
/// The smallest eigenvalue comes from power iteration on rho I - P H P.
template <typename Scalar, typename Op>
std::pair<Scalar, Scalar> min_eigenvalue_matrix_free(Op&& apply, Index dim, const RealVector<Scalar>& excluded,
                                                     std::uint64_t seed, int iters = 5000) {
  const bool restrict = excluded.norm() > Scalar(0);
  const RealVector<Scalar> e = restrict ? RealVector<Scalar>(excluded.normalized()) : RealVector<Scalar>::Zero(dim);
  auto project = [&](RealVector<Scalar> v) {
    if (restrict) v -= e.dot(v) * e;
    return v;
  };
  auto start = [&](std::uint64_t s) {
    GaussianStream rng(s);
    RealVector<Scalar> v(dim);
    for (Index k = 0; k < dim; ++k) v[k] = static_cast<Scalar>(rng.normal());
    return RealVector<Scalar>(project(v).normalized());
  };

  RealVector<Scalar> v = start(seed);
  Scalar rho = 0;
  for (int k = 0; k < iters; ++k) {
    RealVector<Scalar> w = project(apply(v));
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) break;
    const Scalar prev = rho;
    rho = norm;
    v = w / norm;
    if (k > 10 && std::abs(rho - prev) <= Scalar(1e-13) * rho) break;
  }
  if (rho == Scalar(0)) return {Scalar(0), Scalar(0)};

  const Scalar shift = Scalar(1.01) * rho;
  v = start(derive_seed(seed, 1));
  Scalar top = 0;
  for (int k = 0; k < iters; ++k) {
    RealVector<Scalar> w = shift * v - project(apply(v));
    w = project(w);
    const Scalar norm = w.norm();
    if (norm == Scalar(0)) break;
    const Scalar prev = top;
    top = v.dot(w);
    v = w / norm;
    if (k > 10 && std::abs(top - prev) <= Scalar(1e-13) * shift) break;
  }
  return {shift - top, rho};
}

/// Classifies x against the trichotomy (no critical point / strict saddle /
/// global minimum).
///   critical     : ||grad f|| <= grad_tol (1 + ||x||^3) c
///   strict saddle: smallest restricted Hessian eigenvalue, or the witness
///                  (g+)^T H_f g+ / ||g||^2, below -eig_tol ||H_f||
///   global min   : otherwise, if d(x, G)/||x_gt|| <= dist_tol
template <typename Scalar, typename Derived>
RegionReport<Scalar> classify_point(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<Derived>& x_plus,
                                    const LandscapeConfig<Scalar>& cfg) {
  cfg.validate();
  const RealVector<Scalar> x = x_plus;
  RegionReport<Scalar> rep;
  rep.in_r1 = in_region1(x, inst.gt_plus, cfg).member;
  rep.in_r2 = in_region2(x, inst.gt_plus, cfg).member;
  rep.in_r3 = in_region3(x, inst.gt_plus, cfg).member;
  rep.grad_g_norm = g_grad(x, inst.gt_plus, cfg.c).norm();
  rep.grad_f_norm = f_grad(inst, x).norm();
  rep.orbit_dist_rel = embedded_dist_to_orbit(x, inst.gt_plus) / inst.gt_plus.norm();
  const Scalar xn = x.norm();
  rep.critical_threshold = cfg.grad_tol * (1 + xn * xn * xn) * cfg.c;
  if (rep.grad_f_norm > rep.critical_threshold) {
    rep.classification = PointClass::NotCritical;
    return rep;
  }

  rep.saddle_witness = inst.gt_plus.dot(f_hess_vec(inst, x, inst.gt_plus));
  const RealVector<Scalar> tangent = apply_M(x);
  if (inst.ensemble.embed_dim() <= cfg.dense_cap) {
    const DenseMatrix<Scalar> H = f_hess_dense(inst, x, cfg.dense_cap);
    Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> full(H, Eigen::EigenvaluesOnly);
    rep.hess_scale = full.eigenvalues().cwiseAbs().maxCoeff();
    const DenseMatrix<Scalar> basis = detail::complement_basis(tangent);
    const DenseMatrix<Scalar> restricted = basis.transpose() * H * basis;
    Eigen::SelfAdjointEigenSolver<DenseMatrix<Scalar>> es(restricted, Eigen::EigenvaluesOnly);
    rep.min_hess_eig = es.eigenvalues().minCoeff();
  } else {
    auto op = [&](const RealVector<Scalar>& u) { return f_hess_vec(inst, x, u); };
    const auto [lo, rho] = min_eigenvalue_matrix_free<Scalar>(op, x.size(), tangent, inst.ensemble.seed());
    rep.min_hess_eig = lo;
    rep.hess_scale = rho;
  }

  const Scalar eig_floor = -cfg.eig_tol * rep.hess_scale;
  const Scalar witness_rel = rep.saddle_witness / inst.gt_plus.squaredNorm();
  if (*rep.min_hess_eig < eig_floor || witness_rel < eig_floor) {
    rep.classification = PointClass::StrictSaddleCandidate;
  } else if (rep.orbit_dist_rel <= cfg.dist_tol) {
    rep.classification = PointClass::GlobalMinimum;
  } else {
    rep.classification = PointClass::Unresolved;
  }
  return rep;
}

// ---- critical points of g ----------------------------------------------------

enum class CriticalKind { Origin, Orbit, OrthogonalCircle };

constexpr std::string_view to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::Origin: return "origin";
    case CriticalKind::Orbit: return "orbit";
    case CriticalKind::OrthogonalCircle: return "orthogonal";
  }
  return "unknown";
}

template <typename Scalar>
struct CriticalPoint {
  CriticalKind kind;
  RealVector<Scalar> x;
};

/// 0, k orbit points x_gt e^{2 pi i j / k}, and (for n >= 2) k points with
/// ||x||^2 = ||x_gt||^2 / 2 and <x, x_gt> = 0 along seeded random directions.
template <typename Derived>
std::vector<CriticalPoint<typename Derived::Scalar>> g_critical_points(const Eigen::MatrixBase<Derived>& gt_plus,
                                                                       int k, std::uint64_t seed = 0) {
  using Scalar = typename Derived::Scalar;
  const Scalar gg = gt_plus.squaredNorm();
  if (gg == Scalar(0)) throw std::invalid_argument("g_critical_points: zero ground truth");
  if (k < 1) throw std::invalid_argument("g_critical_points: k must be >= 1");
  const Index d = gt_plus.size();
  const RealVector<Scalar> gp = gt_plus;
  const RealVector<Scalar> gm = apply_M(gt_plus);

  std::vector<CriticalPoint<Scalar>> out;
  out.push_back({CriticalKind::Origin, RealVector<Scalar>::Zero(d)});
  for (int j = 0; j < k; ++j) {
    const Scalar theta = 2 * std::numbers::pi_v<Scalar> * Scalar(j) / Scalar(k);
    out.push_back({CriticalKind::Orbit, rotate_phase(gp, theta)});
  }
  if (d >= 4) {
    GaussianStream rng(seed);
    const Scalar radius = std::sqrt(gg / 2);
    for (int j = 0; j < k; ++j) {
      RealVector<Scalar> v(d);
      do {
        for (Index t = 0; t < d; ++t) v[t] = static_cast<Scalar>(rng.normal());
        v -= v.dot(gp) / gg * gp;
        v -= v.dot(gm) / gg * gm;
      } while (v.norm() == Scalar(0));
      out.push_back({CriticalKind::OrthogonalCircle, radius * v.normalized()});
    }
  }
  return out;
}

// ---- coverage ------------------------------------------------------------------

template <typename Scalar>
struct CoverageSample {
  RealVector<Scalar> x;
  bool r1;
  bool r2;
  bool r3;
  bool covered() const { return r1 || r2 || r3; }
};

template <typename Scalar>
struct CoverageResult {
  double fraction = 0;
  std::size_t covered = 0;
  std::vector<CoverageSample<Scalar>> samples;
  std::vector<RealVector<Scalar>> uncovered;
};

/// Membership of `sample_count` points drawn uniformly from the ball of
/// radius radius_multiplier * ||x_gt||, followed by g's critical-set
/// representatives (8 per family) and 4 perturbations of each at relative
/// radius 1e-3.
template <typename Scalar, typename Derived>
CoverageResult<Scalar> coverage_check(const Eigen::MatrixBase<Derived>& gt_plus, const LandscapeConfig<Scalar>& cfg,
                                      std::size_t sample_count, Scalar radius_multiplier, std::uint64_t seed) {
  cfg.validate();
  const Index d = gt_plus.size();
  const RealVector<Scalar> gp = gt_plus;
  const Scalar g_norm = gp.norm();
  if (g_norm == Scalar(0)) throw std::invalid_argument("coverage_check: zero ground truth");

  std::vector<RealVector<Scalar>> points;
  points.reserve(sample_count + 128);
  GaussianStream rng(seed);
  const Scalar radius = radius_multiplier * g_norm;
  for (std::size_t s = 0; s < sample_count; ++s) {
    RealVector<Scalar> v(d);
    do {
      for (Index t = 0; t < d; ++t) v[t] = static_cast<Scalar>(rng.normal());
    } while (v.norm() == Scalar(0));
    const Scalar r = radius * std::pow(static_cast<Scalar>(rng.uniform01()), Scalar(1) / Scalar(d));
    points.push_back(r * v.normalized());
  }
  for (const auto& cp : g_critical_points(gp, 8, derive_seed(seed, 1))) {
    points.push_back(cp.x);
    for (int j = 0; j < 4; ++j) {
      RealVector<Scalar> v(d);
      for (Index t = 0; t < d; ++t) v[t] = static_cast<Scalar>(rng.normal());
      points.push_back(cp.x + Scalar(1e-3) * g_norm * v.normalized());
    }
  }

  CoverageResult<Scalar> out;
  out.samples.reserve(points.size());
  for (auto& p : points) {
    CoverageSample<Scalar> s{p, in_region1(p, gp, cfg).member, in_region2(p, gp, cfg).member,
                             in_region3(p, gp, cfg).member};
    if (s.covered()) {
      ++out.covered;
    } else {
      out.uncovered.push_back(p);
    }
    out.samples.push_back(std::move(s));
  }
  out.fraction = points.empty() ? 1.0 : static_cast<double>(out.covered) / static_cast<double>(points.size());
  return out;
}

}  // namespace tpr
