#pragma once

// The C^n <-> R^{2n} dictionary. A complex vector z is stored in the real
// embedding as (Re z; Im z); the companion embedding of i*z is M z+ =
// (-Im z; Re z). Every other module relies on this block layout.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tpr/types.hpp"

namespace tpr {

namespace detail {

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (!v.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

template <typename Derived>
void require_even(const Eigen::MatrixBase<Derived>& v, const char* what) {
  if (v.size() % 2 != 0) throw std::invalid_argument(std::string(what) + ": odd embedding length");
}

}  // namespace detail

/// (Re z; Im z).
template <typename Derived>
RealVector<typename Derived::RealScalar> embed_plus(const Eigen::MatrixBase<Derived>& z) {
  using Real = typename Derived::RealScalar;
  detail::require_finite(z, "embed_plus");
  const Index n = z.size();
  RealVector<Real> out(2 * n);
  out.head(n) = z.real();
  out.tail(n) = z.imag();
  return out;
}

/// (-Im z; Re z), the embedding of i*z.
template <typename Derived>
RealVector<typename Derived::RealScalar> embed_minus(const Eigen::MatrixBase<Derived>& z) {
  using Real = typename Derived::RealScalar;
  detail::require_finite(z, "embed_minus");
  const Index n = z.size();
  RealVector<Real> out(2 * n);
  out.head(n) = -z.imag();
  out.tail(n) = z.real();
  return out;
}

/// Block rotation M = [0 -I; I 0]. M is skew-symmetric and M^2 = -I.
template <typename Derived>
RealVector<typename Derived::Scalar> apply_M(const Eigen::MatrixBase<Derived>& x) {
  detail::require_even(x, "apply_M");
  const Index n = x.size() / 2;
  RealVector<typename Derived::Scalar> out(x.size());
  out.head(n) = -x.tail(n);
  out.tail(n) = x.head(n);
  return out;
}

template <typename Derived>
ComplexVector<typename Derived::Scalar> unembed(const Eigen::MatrixBase<Derived>& x) {
  using Real = typename Derived::Scalar;
  detail::require_even(x, "unembed");
  const Index n = x.size() / 2;
  ComplexVector<Real> out(n);
  for (Index k = 0; k < n; ++k) out[k] = std::complex<Real>(x[k], x[n + k]);
  return out;
}

/// <a, b> = sum_k a_k conj(b_k).
template <typename DerivedA, typename DerivedB>
std::complex<typename DerivedA::RealScalar> hermitian_inner(const Eigen::MatrixBase<DerivedA>& a,
                                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("hermitian_inner: length mismatch");
  // Eigen's dot conjugates its left operand.
  return b.dot(a);
}

template <typename Scalar>
Scalar wrap_angle(Scalar theta) {
  constexpr Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  theta = std::fmod(theta, two_pi);
  if (theta < 0) theta += two_pi;
  if (theta >= two_pi) theta = 0;
  return theta;
}

/// argmin over theta in [0, 2pi) of ||x - x_gt e^{i theta}||, i.e. arg <x, x_gt>.
/// Returns 0 when <x, x_gt> = 0.
template <typename DerivedX, typename DerivedG>
typename DerivedX::RealScalar phase_align(const Eigen::MatrixBase<DerivedX>& x,
                                          const Eigen::MatrixBase<DerivedG>& x_gt) {
  using Real = typename DerivedX::RealScalar;
  if (x.size() != x_gt.size()) throw std::invalid_argument("phase_align: length mismatch");
  if (x_gt.squaredNorm() == Real(0)) throw std::invalid_argument("phase_align: zero ground truth");
  const std::complex<Real> h = hermitian_inner(x, x_gt);
  if (h == std::complex<Real>(0)) return Real(0);
  return wrap_angle(std::arg(h));
}

/// Distance from x to the orbit {x_gt e^{i theta}}.
template <typename DerivedX, typename DerivedG>
typename DerivedX::RealScalar dist_to_orbit(const Eigen::MatrixBase<DerivedX>& x,
                                            const Eigen::MatrixBase<DerivedG>& x_gt) {
  using Real = typename DerivedX::RealScalar;
  if (x.size() != x_gt.size()) throw std::invalid_argument("dist_to_orbit: length mismatch");
  const Real sq = x.squaredNorm() + x_gt.squaredNorm() - 2 * std::abs(hermitian_inner(x, x_gt));
  return std::sqrt(std::max(sq, Real(0)));
}

// Real-embedding forms of the orbit quantities. With x+ and g+ the
// embeddings, |<x, g>|^2 = <x+, g+>^2 + <x+, g->^2.

template <typename DerivedX, typename DerivedG>
typename DerivedX::Scalar embedded_overlap_sq(const Eigen::MatrixBase<DerivedX>& x_plus,
                                              const Eigen::MatrixBase<DerivedG>& gt_plus) {
  detail::require_even(x_plus, "embedded_overlap_sq");
  if (x_plus.size() != gt_plus.size())
    throw std::invalid_argument("embedded_overlap_sq: length mismatch");
  const auto gt_minus = apply_M(gt_plus);
  const auto re = x_plus.dot(gt_plus);
  const auto im = x_plus.dot(gt_minus);
  return re * re + im * im;
}

template <typename DerivedX, typename DerivedG>
typename DerivedX::Scalar embedded_dist_to_orbit(const Eigen::MatrixBase<DerivedX>& x_plus,
                                                 const Eigen::MatrixBase<DerivedG>& gt_plus) {
  using Real = typename DerivedX::Scalar;
  const Real overlap = std::sqrt(embedded_overlap_sq(x_plus, gt_plus));
  const Real sq = x_plus.squaredNorm() + gt_plus.squaredNorm() - 2 * overlap;
  return std::sqrt(std::max(sq, Real(0)));
}

/// e^{i theta} z expressed in the embedding: cos(theta) x+ + sin(theta) x-.
template <typename Derived>
RealVector<typename Derived::Scalar> rotate_phase(const Eigen::MatrixBase<Derived>& x_plus,
                                                  typename Derived::Scalar theta) {
  return std::cos(theta) * x_plus + std::sin(theta) * apply_M(x_plus);
}

}  // namespace tpr
