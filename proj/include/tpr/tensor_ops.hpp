#pragma once

// Contractions with the fourth-order tensors
//   T = (1/c) sum_i (a_i+)^{(x)4},
//   S_{ijkl} = 1[i=j, k=l] + 1[i=k, j=l] + 1[i=l, j=k],
// and U(x+), the 10-term signed sum for which f = c<T, U> and g = c<S, U>.
// None of these tensors is ever materialized.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "tpr/complex_embed.hpp"
#include "tpr/ensemble.hpp"
#include "tpr/random.hpp"
#include "tpr/types.hpp"

namespace tpr {

/// Four probe vectors u1 (x) u2 (x) u3 (x) u4. Estimator outputs keep each
/// vector at unit norm.
template <typename Scalar>
struct Rank1Probe {
  std::array<RealVector<Scalar>, 4> u;

  const RealVector<Scalar>& operator[](int slot) const { return u[slot]; }
  RealVector<Scalar>& operator[](int slot) { return u[slot]; }

  bool is_unit(Scalar tol = Scalar(1e-12)) const {
    for (const auto& v : u)
      if (std::abs(v.norm() - Scalar(1)) > tol) return false;
    return true;
  }
};

namespace detail {

template <typename Scalar>
void require_probe_dim(const Rank1Probe<Scalar>& probe, Index dim, const char* what) {
  for (const auto& v : probe.u)
    if (v.size() != dim) throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

}  // namespace detail

template <typename Scalar, typename D1, typename D2, typename D3, typename D4>
Scalar t_contract(const SensingEnsemble<Scalar>& ensemble, const Eigen::MatrixBase<D1>& u1,
                  const Eigen::MatrixBase<D2>& u2, const Eigen::MatrixBase<D3>& u3,
                  const Eigen::MatrixBase<D4>& u4) {
  const Index d = ensemble.embed_dim();
  if (u1.size() != d || u2.size() != d || u3.size() != d || u4.size() != d)
    throw std::invalid_argument("t_contract: dimension mismatch");
  const auto& A = ensemble.plus();
  const RealVector<Scalar> p1 = A * u1;
  const RealVector<Scalar> p2 = A * u2;
  const RealVector<Scalar> p3 = A * u3;
  const RealVector<Scalar> p4 = A * u4;
  return (p1.array() * p2.array() * p3.array() * p4.array()).sum() / ensemble.c();
}

template <typename Scalar>
Scalar t_contract(const SensingEnsemble<Scalar>& ensemble, const Rank1Probe<Scalar>& probe) {
  return t_contract(ensemble, probe[0], probe[1], probe[2], probe[3]);
}

/// <u1,u2><u3,u4> + <u1,u3><u2,u4> + <u1,u4><u2,u3>.
template <typename D1, typename D2, typename D3, typename D4>
typename D1::Scalar s_contract(const Eigen::MatrixBase<D1>& u1, const Eigen::MatrixBase<D2>& u2,
                               const Eigen::MatrixBase<D3>& u3, const Eigen::MatrixBase<D4>& u4) {
  const Index d = u1.size();
  if (u2.size() != d || u3.size() != d || u4.size() != d)
    throw std::invalid_argument("s_contract: dimension mismatch");
  return u1.dot(u2) * u3.dot(u4) + u1.dot(u3) * u2.dot(u4) + u1.dot(u4) * u2.dot(u3);
}

template <typename Scalar>
Scalar s_contract(const Rank1Probe<Scalar>& probe) {
  return s_contract(probe[0], probe[1], probe[2], probe[3]);
}

// ---- U(x+) -----------------------------------------------------------------

/// One term sign * multiplicity * v1 (x) v1 (x) v2 (x) v2.
template <typename Scalar>
struct UTerm {
  int sign;
  int multiplicity;
  RealVector<Scalar> v1;
  RealVector<Scalar> v2;

  int weight() const { return sign * multiplicity; }
};

/// The ten terms of U(x+), in this order:
///   x+^4, x-^4, g+^4, g-^4, 2 x+^2 x-^2, 2 g+^2 g-^2,
///   -2 x+^2 g-^2, -2 x-^2 g-^2, -2 x+^2 g+^2, -2 x-^2 g+^2
/// where g = x_gt.
template <typename DerivedX, typename DerivedG>
std::array<UTerm<typename DerivedX::Scalar>, 10> u_tensor_terms(const Eigen::MatrixBase<DerivedX>& x_plus,
                                                                const Eigen::MatrixBase<DerivedG>& gt_plus) {
  using Scalar = typename DerivedX::Scalar;
  if (x_plus.size() != gt_plus.size()) throw std::invalid_argument("u_tensor_terms: dimension mismatch");
  const RealVector<Scalar> xp = x_plus;
  const RealVector<Scalar> xm = apply_M(x_plus);
  const RealVector<Scalar> gp = gt_plus;
  const RealVector<Scalar> gm = apply_M(gt_plus);
  return {{
      {+1, 1, xp, xp},
      {+1, 1, xm, xm},
      {+1, 1, gp, gp},
      {+1, 1, gm, gm},
      {+1, 2, xp, xm},
      {+1, 2, gp, gm},
      {-1, 2, xp, gm},
      {-1, 2, xm, gm},
      {-1, 2, xp, gp},
      {-1, 2, xm, gp},
  }};
}

/// f(x+) = c <T, U(x+)>.
template <typename Scalar, typename Derived>
Scalar f_via_tensor(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<Derived>& x_plus) {
  if (x_plus.size() != inst.ensemble.embed_dim()) throw std::invalid_argument("f_via_tensor: dimension mismatch");
  Scalar acc = 0;
  for (const auto& term : u_tensor_terms(x_plus, inst.gt_plus))
    acc += term.weight() * t_contract(inst.ensemble, term.v1, term.v1, term.v2, term.v2);
  return inst.ensemble.c() * acc;
}

/// g(x+) = c <S, U(x+)>.
template <typename DerivedX, typename DerivedG>
typename DerivedX::Scalar g_via_tensor(const Eigen::MatrixBase<DerivedX>& x_plus,
                                       const Eigen::MatrixBase<DerivedG>& gt_plus, typename DerivedX::Scalar c) {
  typename DerivedX::Scalar acc = 0;
  for (const auto& term : u_tensor_terms(x_plus, gt_plus))
    acc += term.weight() * s_contract(term.v1, term.v1, term.v2, term.v2);
  return c * acc;
}

// ---- T - S -------------------------------------------------------------------

/// The signed tensor T - S as a contraction operator. `s_only` drops the T
/// part entirely, leaving -S.
template <typename Scalar>
class MomentGap {
 public:
  explicit MomentGap(const SensingEnsemble<Scalar>& ensemble)
      : vectors_(ensemble.plus()), inv_c_(Scalar(1) / ensemble.c()), dim_(ensemble.embed_dim()) {}

  static MomentGap s_only(Index embed_dim) { return MomentGap(embed_dim); }

  Index dim() const { return dim_; }
  Index m() const { return vectors_.rows(); }
  const DenseMatrix<Scalar>& vectors() const { return vectors_; }

  /// Column j holds <a_i+, u_j>.
  DenseMatrix<Scalar> projections(const Rank1Probe<Scalar>& probe) const {
    detail::require_probe_dim(probe, dim_, "MomentGap");
    DenseMatrix<Scalar> proj(vectors_.rows(), 4);
    for (int j = 0; j < 4; ++j) proj.col(j).noalias() = vectors_ * probe[j];
    return proj;
  }

  Scalar contract(const Rank1Probe<Scalar>& probe) const { return contract(probe, projections(probe)); }

  Scalar contract(const Rank1Probe<Scalar>& probe, const DenseMatrix<Scalar>& proj) const {
    const Scalar t = proj.rows() == 0 ? Scalar(0) : proj.rowwise().prod().sum() * inv_c_;
    return t - s_contract(probe);
  }

  /// The vector v with <v, w> = <T - S, probe with w placed at `slot`>.
  /// The probe's own entry at `slot` is ignored.
  RealVector<Scalar> partial(const Rank1Probe<Scalar>& probe, int slot) const {
    return partial(probe, projections(probe), slot);
  }

  RealVector<Scalar> partial(const Rank1Probe<Scalar>& probe, const DenseMatrix<Scalar>& proj, int slot) const {
    if (slot < 0 || slot > 3) throw std::out_of_range("MomentGap::partial: slot must be in [0, 3]");
    const auto [a, b, c] = others(slot);
    RealVector<Scalar> out = RealVector<Scalar>::Zero(dim_);
    if (vectors_.rows() > 0) {
      const RealVector<Scalar> w = proj.col(a).cwiseProduct(proj.col(b)).cwiseProduct(proj.col(c));
      out.noalias() = inv_c_ * (vectors_.transpose() * w);
    }
    out -= probe[a] * probe[b].dot(probe[c]) + probe[b] * probe[a].dot(probe[c]) +
           probe[c] * probe[a].dot(probe[b]);
    return out;
  }

 private:
  explicit MomentGap(Index embed_dim) : vectors_(0, embed_dim), inv_c_(0), dim_(embed_dim) {}

  static std::array<int, 3> others(int slot) {
    std::array<int, 3> out{};
    int k = 0;
    for (int j = 0; j < 4; ++j)
      if (j != slot) out[k++] = j;
    return out;
  }

  DenseMatrix<Scalar> vectors_;
  Scalar inv_c_;
  Index dim_;
};

/// One-slot contraction of T - S; `slot` in [0, 3] is left free.
template <typename Scalar>
RealVector<Scalar> diff_partial_contract(const SensingEnsemble<Scalar>& ensemble, int slot,
                                         const Rank1Probe<Scalar>& probe) {
  return MomentGap<Scalar>(ensemble).partial(probe, slot);
}

// ---- operator-norm estimation --------------------------------------------------

struct OpNormOptions {
  int restarts = 20;
  int max_iter = 200;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct OpNormEstimate {
  Scalar value = 0;
  Rank1Probe<Scalar> probe;
  int restarts_used = 0;
  int iterations = 0;  // sweeps taken by the restart that produced `value`
  bool converged = false;
};

inline std::uint64_t restart_seed(std::uint64_t seed, int restart) {
  return derive_seed(seed, 0x6F706E6F726DULL, static_cast<std::uint64_t>(restart));
}

template <typename Scalar>
Rank1Probe<Scalar> random_unit_probe(Index dim, std::uint64_t seed) {
  GaussianStream rng(seed);
  Rank1Probe<Scalar> probe;
  for (auto& v : probe.u) {
    v.resize(dim);
    do {
      for (Index k = 0; k < dim; ++k) v[k] = static_cast<Scalar>(rng.normal());
    } while (v.norm() == Scalar(0));
    v.normalize();
  }
  return probe;
}

/// Alternating one-slot maximization of |<T - S, u1 (x) u2 (x) u3 (x) u4>|
/// from a given starting probe. Each slot update u_s <- v / ||v|| with v the
/// partial contraction maximizes the contraction over that slot, so the
/// value is nondecreasing sweep over sweep. A zero partial leaves the slot
/// unchanged.
template <typename Scalar>
OpNormEstimate<Scalar> maximize_from(const MomentGap<Scalar>& gap, Rank1Probe<Scalar> probe, int max_iter,
                                     Scalar tol) {
  DenseMatrix<Scalar> proj = gap.projections(probe);
  Scalar value = std::abs(gap.contract(probe, proj));
  OpNormEstimate<Scalar> out;
  out.restarts_used = 1;
  for (int sweep = 1; sweep <= max_iter; ++sweep) {
    bool moved = false;
    for (int slot = 0; slot < 4; ++slot) {
      RealVector<Scalar> v = gap.partial(probe, proj, slot);
      const Scalar norm = v.norm();
      if (!(norm > Scalar(0)) || !std::isfinite(norm)) continue;
      probe[slot] = v / norm;
      if (gap.m() > 0) proj.col(slot).noalias() = gap.vectors() * probe[slot];
      moved = true;
    }
    out.iterations = sweep;
    const Scalar next = std::abs(gap.contract(probe, proj));
    if (!moved) {
      value = Scalar(0);
      out.converged = true;
      break;
    }
    const Scalar gain = next - value;
    value = next;
    if (gain <= tol * std::max(next, std::numeric_limits<Scalar>::min())) {
      out.converged = true;
      break;
    }
  }
  out.value = std::abs(gap.contract(probe));
  out.probe = std::move(probe);
  return out;
}

/// Best result over one restart per seed, in the order given. Ties keep the
/// earliest restart.
template <typename Scalar>
OpNormEstimate<Scalar> opnorm_estimate_with_seeds(const MomentGap<Scalar>& gap,
                                                  std::span<const std::uint64_t> restart_seeds, int max_iter,
                                                  Scalar tol) {
  if (restart_seeds.empty()) throw std::invalid_argument("opnorm_estimate: need at least one restart");
  OpNormEstimate<Scalar> best;
  best.value = -1;
  for (const auto seed : restart_seeds) {
    auto est = maximize_from(gap, random_unit_probe<Scalar>(gap.dim(), seed), max_iter, tol);
    if (est.value > best.value) best = std::move(est);
  }
  best.restarts_used = static_cast<int>(restart_seeds.size());
  return best;
}

/// Lower bound on ||T - S||_op. Restart r starts from a probe drawn
/// uniformly on the sphere with seed restart_seed(options.seed, r).
template <typename Scalar>
OpNormEstimate<Scalar> opnorm_estimate(const MomentGap<Scalar>& gap, const OpNormOptions& options = {}) {
  if (options.restarts < 1) throw std::invalid_argument("opnorm_estimate: restarts must be >= 1");
  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(options.restarts));
  for (int r = 0; r < options.restarts; ++r) seeds[static_cast<std::size_t>(r)] = restart_seed(options.seed, r);
  return opnorm_estimate_with_seeds(gap, std::span<const std::uint64_t>(seeds), options.max_iter,
                                    static_cast<Scalar>(options.tol));
}

template <typename Scalar>
OpNormEstimate<Scalar> opnorm_estimate(const SensingEnsemble<Scalar>& ensemble, const OpNormOptions& options = {}) {
  return opnorm_estimate(MomentGap<Scalar>(ensemble), options);
}

}  // namespace tpr
