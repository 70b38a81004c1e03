#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "tpr/ensemble.hpp"

using namespace tpr;

TEST_CASE("random stream output is pinned") {
  // Frozen from the first draws of seed 42; guards the cross-platform stream.
  GaussianStream rng(42);
  std::mt19937_64 reference(42);
  const double u = static_cast<double>(reference() >> 11) * 0x1.0p-53;
  CHECK(rng.uniform01() == u);

  GaussianStream a(7), b(7);
  for (int k = 0; k < 100; ++k) CHECK(a.normal() == b.normal());
}

TEST_CASE("normal variates follow the Box-Muller recipe") {
  GaussianStream rng(3);
  std::mt19937_64 reference(3);
  const double u1 = 1.0 - static_cast<double>(reference() >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(reference() >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  CHECK(rng.normal() == r * std::cos(2.0 * std::numbers::pi * u2));
  CHECK(rng.normal() == r * std::sin(2.0 * std::numbers::pi * u2));
}

TEST_CASE("normal variates have unit moments") {
  GaussianStream rng(11);
  double s = 0, s2 = 0;
  const int count = 200000;
  for (int k = 0; k < count; ++k) {
    const double v = rng.normal();
    s += v;
    s2 += v * v;
  }
  CHECK(std::abs(s / count) < 0.01);
  CHECK(std::abs(s2 / count - 1.0) < 0.02);
}

TEST_CASE("derived seeds separate streams") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 3, 4) == derive_seed(derive_seed(5, 3), 4));
  static_assert(splitmix64(0) == 0xE220A8397B1DCDAFULL);
}

TEST_CASE("ensemble construction validates its input") {
  CHECK_THROWS_AS(SensingEnsemble<double>(DenseMatrixXd(0, 2), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(SensingEnsemble<double>(DenseMatrixXd::Ones(2, 3), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(SensingEnsemble<double>(DenseMatrixXd::Ones(2, 2), 0.0), std::invalid_argument);
  DenseMatrixXd bad = DenseMatrixXd::Ones(2, 2);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(SensingEnsemble<double>(bad, 1.0), std::invalid_argument);
  CHECK_NOTHROW(SensingEnsemble<double>(DenseMatrixXd::Zero(3, 4), 1.0));
  CHECK_THROWS_AS(sample_ensemble(0, 3, 1), std::invalid_argument);
  CHECK_THROWS_AS(sample_ensemble(2, 0, 1), std::invalid_argument);
}

TEST_CASE("scale constant is m sigma^4") {
  const SensingEnsemble<double> ens(DenseMatrixXd::Ones(5, 4), 2.0);
  CHECK(ens.c() == doctest::Approx(80.0));
  CHECK(ens.n() == 2);
  CHECK(ens.embed_dim() == 4);
}

TEST_CASE("companion rows are the rotated sensing vectors") {
  const auto ens = sample_ensemble(3, 7, 5);
  for (Index i = 0; i < ens.m(); ++i)
    CHECK(ens.minus().row(i).transpose() == apply_M(ens.plus().row(i).transpose()));
}

TEST_CASE("sampling is deterministic and row-major") {
  const auto a = sample_ensemble(2, 4, 99);
  const auto b = sample_ensemble(2, 4, 99);
  CHECK(a.plus() == b.plus());
  GaussianStream rng(99);
  CHECK(a.plus()(0, 0) == rng.normal());
  CHECK(a.plus()(0, 1) == rng.normal());
  CHECK(a.seed() == 99);
  CHECK(sample_ensemble(2, 4, 100).plus() != a.plus());
}

TEST_CASE("one-dimensional measurement of a known vector") {
  DenseMatrixXd rows(1, 2);
  rows << 1.0, 1.0;  // a = 1 + i
  ComplexVectorXd g(1);
  g[0] = {2.0, 0.0};
  const auto inst = make_instance(SensingEnsemble<double>(rows, 1.0), g);
  CHECK(inst.measurements[0] == doctest::Approx(8.0));
}

TEST_CASE("real-embedding quadratic form matches the complex measurement") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = sample_instance(1 + Index(seed % 4), 12, seed);
    for (Index i = 0; i < inst.m(); ++i) {
      const RealVectorXd a = inst.ensemble.plus().row(i).transpose();
      CHECK(quadratic_form(a, inst.gt_plus) == doctest::Approx(inst.measurements[i]).epsilon(1e-12));
      const RealVectorXd ax = oracle::dense_A(a) * inst.gt_plus;
      CHECK(inst.gt_plus.dot(ax) == doctest::Approx(inst.measurements[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("measurements are invariant under a global phase") {
  const auto inst = sample_instance(3, 15, 4);
  const ComplexVectorXd rotated = inst.ground_truth * std::polar(1.0, 1.234);
  const RealVectorXd y = measure(inst.ensemble, rotated);
  CHECK(y.isApprox(inst.measurements, 1e-12));
}

TEST_CASE("sensing matrix spectrum: double eigenvalue ||a||^2 then zeros") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ens = sample_ensemble(1 + Index(seed % 4), 1, seed);
    const RealVectorXd a = ens.plus().row(0).transpose();
    const auto eig = eigen_structure(a);
    const DenseMatrixXd A = dense_sensing_matrix(a);
    CHECK(A.isApprox(oracle::dense_A(a)));
    CHECK(eig.eigenvalue == doctest::Approx(a.squaredNorm()));
    CHECK((A * eig.v1).isApprox(eig.eigenvalue * eig.v1, 1e-12));
    CHECK((A * eig.v2).isApprox(eig.eigenvalue * eig.v2, 1e-12));
    CHECK(std::abs(eig.v1.dot(eig.v2)) < 1e-14);
    Eigen::SelfAdjointEigenSolver<DenseMatrixXd> es(A);
    const auto values = es.eigenvalues();
    const Index d = a.size();
    CHECK(values[d - 1] == doctest::Approx(a.squaredNorm()).epsilon(1e-12));
    CHECK(values[d - 2] == doctest::Approx(a.squaredNorm()).epsilon(1e-12));
    for (Index k = 0; k + 2 < d; ++k) CHECK(std::abs(values[k]) < 1e-12 * a.squaredNorm());
  }
  CHECK_THROWS_AS(eigen_structure(RealVectorXd::Zero(4).eval()), std::invalid_argument);
  CHECK_THROWS_AS(dense_sensing_matrix(RealVectorXd::Ones(18).eval()), std::length_error);
}

TEST_CASE("zero sensing vectors give zero measurements") {
  ComplexVectorXd g(2);
  g << std::complex<double>(1, 2), std::complex<double>(3, 4);
  const auto inst = make_instance(SensingEnsemble<double>(DenseMatrixXd::Zero(3, 4), 1.0), g);
  CHECK(inst.measurements.isZero());
}

TEST_CASE("measurement dimension must match") {
  const auto ens = sample_ensemble(2, 3, 1);
  CHECK_THROWS_AS(measure(ens, ComplexVectorXd::Ones(3).eval()), std::invalid_argument);
}

TEST_CASE("two-dimensional measurement with a complex sensing vector") {
  DenseMatrixXd rows(1, 4);
  rows << 1.0, 0.0, 0.0, 1.0;  // a = (1, i)
  ComplexVectorXd x(2);
  x << 1.0, 1.0;
  const auto inst = make_instance(SensingEnsemble<double>(rows, 1.0), x);
  CHECK(inst.measurements[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("sampled entries have zero mean and unit variance") {
  const auto ens = sample_ensemble(4, 10000, 71);
  const auto& v = ens.plus();
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  CHECK(mean > -0.05);
  CHECK(mean < 0.05);
  CHECK(var > 0.95);
  CHECK(var < 1.05);
}

TEST_CASE("smallest ensemble has one vector of two entries") {
  const auto ens = sample_ensemble(1, 1, 5);
  CHECK(ens.plus().rows() == 1);
  CHECK(ens.plus().cols() == 2);
}

TEST_CASE("sensing matrix is rebuilt from its eigenpairs") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const RealVectorXd a = sample_ensemble(1 + Index(seed % 4), 1, seed + 300).plus().row(0).transpose();
    const auto eig = eigen_structure(a);
    const DenseMatrixXd rebuilt = eig.eigenvalue * (eig.v1 * eig.v1.transpose() + eig.v2 * eig.v2.transpose());
    CHECK(rebuilt.isApprox(dense_sensing_matrix(a), 1e-12));
  }
}
