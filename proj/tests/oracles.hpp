#pragma once

// Reference computations that avoid the library's fast paths: materialized
// fourth-order tensors, complex-arithmetic losses, brute-force phase search
// and central differences.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;

/// Row-major d^4 tensor.
struct Tensor4 {
  int d = 0;
  std::vector<double> data;

  explicit Tensor4(int dim) : d(dim), data(static_cast<std::size_t>(dim * dim * dim * dim), 0.0) {}
  double& at(int i, int j, int k, int l) { return data[static_cast<std::size_t>(((i * d + j) * d + k) * d + l)]; }
  double at(int i, int j, int k, int l) const {
    return data[static_cast<std::size_t>(((i * d + j) * d + k) * d + l)];
  }
};

/// (1/c) sum_i a_i^{(x)4} over the rows of `vectors`.
inline Tensor4 dense_T(const Mat& vectors, double c) {
  const int d = static_cast<int>(vectors.cols());
  Tensor4 t(d);
  for (Eigen::Index r = 0; r < vectors.rows(); ++r)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l)
            t.at(i, j, k, l) += vectors(r, i) * vectors(r, j) * vectors(r, k) * vectors(r, l) / c;
  return t;
}

/// delta_ij delta_kl + delta_ik delta_jl + delta_il delta_jk.
inline Tensor4 dense_S(int d) {
  Tensor4 t(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l)
          t.at(i, j, k, l) = double(i == j && k == l) + double(i == k && j == l) + double(i == l && j == k);
  return t;
}

inline Tensor4 difference(const Tensor4& a, const Tensor4& b) {
  Tensor4 out(a.d);
  for (std::size_t k = 0; k < a.data.size(); ++k) out.data[k] = a.data[k] - b.data[k];
  return out;
}

inline double contract(const Tensor4& t, const Vec& u1, const Vec& u2, const Vec& u3, const Vec& u4) {
  double s = 0;
  for (int i = 0; i < t.d; ++i)
    for (int j = 0; j < t.d; ++j)
      for (int k = 0; k < t.d; ++k)
        for (int l = 0; l < t.d; ++l) s += t.at(i, j, k, l) * u1[i] * u2[j] * u3[k] * u4[l];
  return s;
}

/// Contraction over every slot except `slot`, leaving a vector.
inline Vec partial(const Tensor4& t, int slot, const std::array<Vec, 4>& u) {
  Vec out = Vec::Zero(t.d);
  int idx[4];
  for (idx[0] = 0; idx[0] < t.d; ++idx[0])
    for (idx[1] = 0; idx[1] < t.d; ++idx[1])
      for (idx[2] = 0; idx[2] < t.d; ++idx[2])
        for (idx[3] = 0; idx[3] < t.d; ++idx[3]) {
          double w = t.at(idx[0], idx[1], idx[2], idx[3]);
          for (int s = 0; s < 4; ++s)
            if (s != slot) w *= u[static_cast<std::size_t>(s)][idx[s]];
          out[idx[slot]] += w;
        }
  return out;
}

inline CVec to_complex(const Vec& x) {
  const Eigen::Index n = x.size() / 2;
  CVec z(n);
  for (Eigen::Index k = 0; k < n; ++k) z[k] = {x[k], x[n + k]};
  return z;
}

/// sum_k a_k conj(b_k), written out element by element.
inline std::complex<double> inner(const CVec& a, const CVec& b) {
  std::complex<double> s = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) s += a[k] * std::conj(b[k]);
  return s;
}

/// sum_i (|<a_i, x>|^2 - y_i)^2 in complex arithmetic.
inline double loss_complex(const Mat& vectors, const Vec& y, const Vec& x_plus) {
  const CVec x = to_complex(x_plus);
  double s = 0;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const CVec a = to_complex(vectors.row(i).transpose());
    const double r = std::norm(inner(a, x)) - y[i];
    s += r * r;
  }
  return s;
}

/// 8c(||x||^4 + ||g||^4 - |<x, g>|^2 - ||x||^2 ||g||^2) in complex arithmetic.
inline double surrogate_complex(const Vec& x_plus, const Vec& g_plus, double c) {
  const CVec x = to_complex(x_plus);
  const CVec g = to_complex(g_plus);
  const double xx = inner(x, x).real();
  const double gg = inner(g, g).real();
  return 8 * c * (xx * xx + gg * gg - std::norm(inner(x, g)) - xx * gg);
}

/// arg min over a theta grid of ||x - g e^{i theta}||, refined by
/// golden-section search around the best grid point.
inline double orbit_phase_search(const CVec& x, const CVec& g, int grid = 4096) {
  auto dist = [&](double theta) { return (x - g * std::polar(1.0, theta)).norm(); };
  const double step = 2 * std::numbers::pi / grid;
  double best_theta = 0;
  double best = dist(0);
  for (int k = 1; k < grid; ++k) {
    const double d = dist(k * step);
    if (d < best) {
      best = d;
      best_theta = k * step;
    }
  }
  double lo = best_theta - step;
  double hi = best_theta + step;
  const double phi = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double a = hi - phi * (hi - lo);
    const double b = lo + phi * (hi - lo);
    if (dist(a) < dist(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  double theta = std::fmod((lo + hi) / 2, 2 * std::numbers::pi);
  if (theta < 0) theta += 2 * std::numbers::pi;
  return theta;
}

inline double orbit_distance_search(const CVec& x, const CVec& g) {
  return (x - g * std::polar(1.0, orbit_phase_search(x, g))).norm();
}

/// Central-difference gradient with step h * max(1, |x_k|).
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(x[k]));
    Vec xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    g[k] = (f(xp) - f(xm)) / (2 * step);
  }
  return g;
}

/// Central-difference Jacobian of a vector field, column k = d field / d x_k.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& field, const Vec& x, double h = 1e-5) {
  Mat J(x.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double step = h * std::max(1.0, std::abs(x[k]));
    Vec xp = x, xm = x;
    xp[k] += step;
    xm[k] -= step;
    J.col(k) = (field(xp) - field(xm)) / (2 * step);
  }
  return J;
}

/// Dense A = a+ a+^T + a- a-^T with a- built by hand.
inline Mat dense_A(const Vec& a_plus) {
  const Eigen::Index n = a_plus.size() / 2;
  Vec a_minus(a_plus.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    a_minus[k] = -a_plus[n + k];
    a_minus[n + k] = a_plus[k];
  }
  return a_plus * a_plus.transpose() + a_minus * a_minus.transpose();
}

/// Hessian of f from dense A_i: 4 sum_i [ r_i A_i + 2 (A_i x)(A_i x)^T ].
inline Mat dense_hessian(const Mat& vectors, const Vec& y, const Vec& x) {
  Mat H = Mat::Zero(x.size(), x.size());
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
    const Mat A = dense_A(vectors.row(i).transpose());
    const Vec Ax = A * x;
    const double r = x.dot(Ax) - y[i];
    H += 4 * (r * A + 2 * Ax * Ax.transpose());
  }
  return H;
}

inline double rel_err(double got, double want, double floor = 1.0) {
  return std::abs(got - want) / std::max(floor, std::abs(want));
}

inline double rel_err(const Vec& got, const Vec& want, double floor = 1.0) {
  return (got - want).norm() / std::max(floor, want.norm());
}

}  // namespace oracle
