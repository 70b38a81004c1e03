#pragma once

// The quartic loss f(x+) = sum_i (<A_i x+, x+> - y_i)^2 and its idealized
// surrogate g(x+) = 8c(||x||^4 + ||x_gt||^4 - |<x, x_gt>|^2 - ||x||^2 ||x_gt||^2),
// with gradients and Hessians taken in the real embedding.

#include <optional>
#include <stdexcept>

#include "tpr/complex_embed.hpp"
#include "tpr/ensemble.hpp"
#include "tpr/types.hpp"

namespace tpr {

inline constexpr Index kDefaultDenseHessianCap = 64;

template <typename Scalar>
struct EvalReport {
  Scalar value;
  RealVector<Scalar> gradient;
  std::optional<DenseMatrix<Scalar>> hessian;
};

/// Per-measurement projections at a point: p_i = <a_i+, x>, q_i = <a_i-, x>,
/// quad_i = p_i^2 + q_i^2 = <A_i x, x> and residual r_i = quad_i - y_i.
template <typename Scalar>
struct ResidualState {
  RealVector<Scalar> p;
  RealVector<Scalar> q;
  RealVector<Scalar> quad;
  RealVector<Scalar> residual;
};

template <typename Scalar, typename Derived>
ResidualState<Scalar> residual_state(const ProblemInstance<Scalar>& inst,
                                     const Eigen::MatrixBase<Derived>& x_plus) {
  if (x_plus.size() != inst.ensemble.embed_dim())
    throw std::invalid_argument("objective: dimension mismatch");
  ResidualState<Scalar> s;
  s.p.noalias() = inst.ensemble.plus() * x_plus;
  s.q.noalias() = inst.ensemble.minus() * x_plus;
  s.quad = s.p.array().square() + s.q.array().square();
  s.residual = s.quad - inst.measurements;
  return s;
}

template <typename Scalar>
Scalar f_value(const ResidualState<Scalar>& s) {
  return s.residual.squaredNorm();
}

/// 4 sum_i r_i A_i x.
template <typename Scalar>
RealVector<Scalar> f_grad(const ProblemInstance<Scalar>& inst, const ResidualState<Scalar>& s) {
  RealVector<Scalar> g;
  g.noalias() = inst.ensemble.plus().transpose() * (s.residual.array() * s.p.array()).matrix();
  g.noalias() += inst.ensemble.minus().transpose() * (s.residual.array() * s.q.array()).matrix();
  g *= Scalar(4);
  return g;
}

template <typename Scalar, typename Derived>
Scalar f_value(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<Derived>& x_plus) {
  return f_value(residual_state(inst, x_plus));
}

template <typename Scalar, typename Derived>
RealVector<Scalar> f_grad(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<Derived>& x_plus) {
  return f_grad(inst, residual_state(inst, x_plus));
}

/// H_f u = 4 sum_i [ r_i A_i u + 2 <A_i x, u> A_i x ].
template <typename Scalar, typename DerivedX, typename DerivedU>
RealVector<Scalar> f_hess_vec(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<DerivedX>& x_plus,
                              const Eigen::MatrixBase<DerivedU>& u) {
  if (u.size() != x_plus.size()) throw std::invalid_argument("f_hess_vec: dimension mismatch");
  const auto s = residual_state(inst, x_plus);
  const RealVector<Scalar> pu = inst.ensemble.plus() * u;
  const RealVector<Scalar> qu = inst.ensemble.minus() * u;
  // <A_i x, u> = p_i pu_i + q_i qu_i
  const auto ax_u = (s.p.array() * pu.array() + s.q.array() * qu.array()).eval();
  const RealVector<Scalar> w_plus = s.residual.array() * pu.array() + 2 * ax_u * s.p.array();
  const RealVector<Scalar> w_minus = s.residual.array() * qu.array() + 2 * ax_u * s.q.array();
  RealVector<Scalar> out;
  out.noalias() = inst.ensemble.plus().transpose() * w_plus;
  out.noalias() += inst.ensemble.minus().transpose() * w_minus;
  return Scalar(4) * out;
}

/// H_f = 4 [ P^T diag(r) P + Q^T diag(r) Q + 2 W^T W ] with rows
/// P_i = a_i+, Q_i = a_i-, W_i = p_i a_i+ + q_i a_i- = (A_i x)^T.
template <typename Scalar, typename Derived>
DenseMatrix<Scalar> f_hess_dense(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<Derived>& x_plus,
                                 Index cap = kDefaultDenseHessianCap) {
  if (inst.ensemble.embed_dim() > cap)
    throw std::length_error("f_hess_dense: embedding dimension above dense cap");
  const auto s = residual_state(inst, x_plus);
  const auto& P = inst.ensemble.plus();
  const auto& Q = inst.ensemble.minus();
  const DenseMatrix<Scalar> W = s.p.asDiagonal() * P + s.q.asDiagonal() * Q;
  DenseMatrix<Scalar> H = P.transpose() * s.residual.asDiagonal() * P;
  H.noalias() += Q.transpose() * s.residual.asDiagonal() * Q;
  H.noalias() += Scalar(2) * W.transpose() * W;
  H *= Scalar(4);
  // Restore exact symmetry lost to summation order.
  return (H + H.transpose()) / Scalar(2);
}

template <typename Scalar, typename Derived>
EvalReport<Scalar> evaluate_f(const ProblemInstance<Scalar>& inst, const Eigen::MatrixBase<Derived>& x_plus,
                              bool with_hessian = false, Index cap = kDefaultDenseHessianCap) {
  const auto s = residual_state(inst, x_plus);
  EvalReport<Scalar> report{f_value(s), f_grad(inst, s), std::nullopt};
  if (with_hessian && inst.ensemble.embed_dim() <= cap) report.hessian = f_hess_dense(inst, x_plus, cap);
  return report;
}

// ---- surrogate g -----------------------------------------------------------

template <typename DerivedX, typename DerivedG>
typename DerivedX::Scalar g_value(const Eigen::MatrixBase<DerivedX>& x_plus,
                                  const Eigen::MatrixBase<DerivedG>& gt_plus, typename DerivedX::Scalar c) {
  const auto xx = x_plus.squaredNorm();
  const auto gg = gt_plus.squaredNorm();
  const auto overlap = embedded_overlap_sq(x_plus, gt_plus);
  return 8 * c * (xx * xx + gg * gg - overlap - xx * gg);
}

/// 8c (4 x ||x||^2 - 2 x ||x_gt||^2 - 2 g+ <x, g+> - 2 g- <g-, x>).
template <typename DerivedX, typename DerivedG>
RealVector<typename DerivedX::Scalar> g_grad(const Eigen::MatrixBase<DerivedX>& x_plus,
                                             const Eigen::MatrixBase<DerivedG>& gt_plus,
                                             typename DerivedX::Scalar c) {
  using Scalar = typename DerivedX::Scalar;
  if (x_plus.size() != gt_plus.size()) throw std::invalid_argument("g_grad: dimension mismatch");
  const RealVector<Scalar> gt_minus = apply_M(gt_plus);
  const Scalar xx = x_plus.squaredNorm();
  const Scalar gg = gt_plus.squaredNorm();
  RealVector<Scalar> out = (4 * xx - 2 * gg) * x_plus;
  out -= 2 * x_plus.dot(gt_plus) * gt_plus;
  out -= 2 * x_plus.dot(gt_minus) * gt_minus;
  return 8 * c * out;
}

/// 8c (8 x x^T + 4 ||x||^2 I - 2 g+ g+^T - 2 g- g-^T - 2 ||x_gt||^2 I), with I
/// the identity on the full 2n-dimensional embedding.
template <typename DerivedX, typename DerivedG>
DenseMatrix<typename DerivedX::Scalar> g_hess(const Eigen::MatrixBase<DerivedX>& x_plus,
                                              const Eigen::MatrixBase<DerivedG>& gt_plus,
                                              typename DerivedX::Scalar c) {
  using Scalar = typename DerivedX::Scalar;
  if (x_plus.size() != gt_plus.size()) throw std::invalid_argument("g_hess: dimension mismatch");
  const RealVector<Scalar> gt_minus = apply_M(gt_plus);
  DenseMatrix<Scalar> H = 8 * x_plus * x_plus.transpose();
  H -= 2 * gt_plus * gt_plus.transpose();
  H -= 2 * gt_minus * gt_minus.transpose();
  H.diagonal().array() += 4 * x_plus.squaredNorm() - 2 * gt_plus.squaredNorm();
  return 8 * c * H;
}

}  // namespace tpr
