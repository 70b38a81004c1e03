#pragma once

#include <complex>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace tpr {

using Eigen::Index;

template <typename Scalar>
using RealVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using ComplexVector = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using RealVectorXd = RealVector<double>;
using ComplexVectorXd = ComplexVector<double>;
using DenseMatrixXd = DenseMatrix<double>;

}  // namespace tpr
