#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include "tpr/complex_embed.hpp"
#include "tpr/random.hpp"
#include "tpr/types.hpp"

namespace tpr {

/// m real sensing vectors a_i+ in R^{2n}, stored as the rows of a dense
/// matrix, together with their companions a_i- = M a_i+. sigma is the
/// generator's per-entry standard deviation; c = m sigma^4 scales T.
template <typename Scalar>
class SensingEnsemble {
 public:
  SensingEnsemble(DenseMatrix<Scalar> vectors, Scalar sigma, std::uint64_t seed = 0)
      : plus_(std::move(vectors)), sigma_(sigma), seed_(seed) {
    if (plus_.rows() < 1) throw std::invalid_argument("SensingEnsemble: need m >= 1");
    if (plus_.cols() < 2 || plus_.cols() % 2 != 0)
      throw std::invalid_argument("SensingEnsemble: vector length must be even and >= 2");
    if (!(sigma_ > 0)) throw std::invalid_argument("SensingEnsemble: sigma must be positive");
    if (!plus_.allFinite()) throw std::invalid_argument("SensingEnsemble: non-finite entry");
    const Index n = dim();
    minus_.resize(plus_.rows(), plus_.cols());
    minus_.leftCols(n) = -plus_.rightCols(n);
    minus_.rightCols(n) = plus_.leftCols(n);
  }

  Index n() const { return plus_.cols() / 2; }
  Index dim() const { return plus_.cols() / 2; }
  Index embed_dim() const { return plus_.cols(); }
  Index m() const { return plus_.rows(); }
  Scalar sigma() const { return sigma_; }
  Scalar c() const { return static_cast<Scalar>(m()) * sigma_ * sigma_ * sigma_ * sigma_; }
  std::uint64_t seed() const { return seed_; }

  /// Rows a_i+.
  const DenseMatrix<Scalar>& plus() const { return plus_; }
  /// Rows a_i- = M a_i+.
  const DenseMatrix<Scalar>& minus() const { return minus_; }

 private:
  DenseMatrix<Scalar> plus_;
  DenseMatrix<Scalar> minus_;
  Scalar sigma_;
  std::uint64_t seed_;
};

/// Ensemble + ground truth + exact intensity measurements.
template <typename Scalar>
struct ProblemInstance {
  SensingEnsemble<Scalar> ensemble;
  ComplexVector<Scalar> ground_truth;
  RealVector<Scalar> gt_plus;
  RealVector<Scalar> gt_minus;
  RealVector<Scalar> measurements;

  Index n() const { return ensemble.n(); }
  Index m() const { return ensemble.m(); }
};

/// i.i.d. N(0, 1) entries, sigma = 1. Rows are filled in order from a single
/// GaussianStream(seed).
template <typename Scalar = double>
SensingEnsemble<Scalar> sample_ensemble(Index n, Index m, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_ensemble: n must be >= 1");
  if (m < 1) throw std::invalid_argument("sample_ensemble: m must be >= 1");
  GaussianStream rng(seed);
  DenseMatrix<Scalar> vectors(m, 2 * n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < 2 * n; ++j) vectors(i, j) = static_cast<Scalar>(rng.normal());
  return SensingEnsemble<Scalar>(std::move(vectors), Scalar(1), seed);
}

/// y_i = |<a_i, x_gt>|^2 with a_i = unembed(a_i+).
template <typename Scalar, typename Derived>
RealVector<Scalar> measure(const SensingEnsemble<Scalar>& ensemble,
                           const Eigen::MatrixBase<Derived>& x_gt) {
  if (x_gt.size() != ensemble.n()) throw std::invalid_argument("measure: dimension mismatch");
  RealVector<Scalar> y(ensemble.m());
  for (Index i = 0; i < ensemble.m(); ++i) {
    const ComplexVector<Scalar> a = unembed(ensemble.plus().row(i).transpose());
    y[i] = std::norm(hermitian_inner(a, x_gt));
  }
  return y;
}

/// <A x+, x+> = <a+, x+>^2 + <a-, x+>^2 without forming A = a+a+^T + a-a-^T.
template <typename DerivedA, typename DerivedX>
typename DerivedA::Scalar quadratic_form(const Eigen::MatrixBase<DerivedA>& a_plus,
                                         const Eigen::MatrixBase<DerivedX>& x_plus) {
  if (a_plus.size() != x_plus.size()) throw std::invalid_argument("quadratic_form: length mismatch");
  const auto p = a_plus.dot(x_plus);
  const auto q = apply_M(a_plus).dot(x_plus);
  return p * p + q * q;
}

template <typename Scalar>
struct SensingEigen {
  Scalar eigenvalue;
  RealVector<Scalar> v1;
  RealVector<Scalar> v2;
};

/// A = a+a+^T + a-a-^T has the double eigenvalue ||a+||^2 on span{a+, a-}
/// and is zero on the complement.
template <typename Derived>
SensingEigen<typename Derived::Scalar> eigen_structure(const Eigen::MatrixBase<Derived>& a_plus) {
  using Scalar = typename Derived::Scalar;
  const Scalar norm_sq = a_plus.squaredNorm();
  if (norm_sq == Scalar(0)) throw std::invalid_argument("eigen_structure: zero sensing vector");
  const Scalar norm = std::sqrt(norm_sq);
  RealVector<Scalar> v1 = a_plus / norm;
  RealVector<Scalar> v2 = apply_M(a_plus) / norm;
  return {norm_sq, std::move(v1), std::move(v2)};
}

/// Dense A_i, for oracle checks on small problems only.
template <typename Derived>
DenseMatrix<typename Derived::Scalar> dense_sensing_matrix(const Eigen::MatrixBase<Derived>& a_plus) {
  if (a_plus.size() > 16) throw std::length_error("dense_sensing_matrix: limited to 2n <= 16");
  const auto a_minus = apply_M(a_plus);
  return a_plus * a_plus.transpose() + a_minus * a_minus.transpose();
}

template <typename Scalar, typename Derived>
ProblemInstance<Scalar> make_instance(SensingEnsemble<Scalar> ensemble,
                                      const Eigen::MatrixBase<Derived>& x_gt) {
  ComplexVector<Scalar> gt = x_gt;
  RealVector<Scalar> y = measure(ensemble, gt);
  RealVector<Scalar> gt_plus = embed_plus(gt);
  RealVector<Scalar> gt_minus = embed_minus(gt);
  return {std::move(ensemble), std::move(gt), std::move(gt_plus), std::move(gt_minus), std::move(y)};
}

/// Ensemble from `seed`; ground truth with i.i.d. N(0, 1) embedding entries
/// drawn from a stream derived from the same seed.
template <typename Scalar = double>
ProblemInstance<Scalar> sample_instance(Index n, Index m, std::uint64_t seed) {
  auto ensemble = sample_ensemble<Scalar>(n, m, seed);
  GaussianStream rng(derive_seed(seed, 0x67742D7472757468ULL));
  RealVector<Scalar> gt_plus(2 * n);
  for (Index j = 0; j < 2 * n; ++j) gt_plus[j] = static_cast<Scalar>(rng.normal());
  return make_instance(std::move(ensemble), unembed(gt_plus));
}

}  // namespace tpr
