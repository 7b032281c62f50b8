#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>

#include "scoreloc/errors.hpp"
#include "scoreloc/geometry.hpp"

namespace scoreloc {

/// Least-squares rigid transform taking `from` (3xN) onto `to` (3xN), with
/// the reflection case folded back into SO(3).
/// Throws DegenerateConfiguration when either set is collinear or coincident.
template <typename DerivedFrom, typename DerivedTo>
RigidPose<typename DerivedFrom::Scalar> kabsch(const Eigen::MatrixBase<DerivedFrom>& from,
                                               const Eigen::MatrixBase<DerivedTo>& to) {
  using Scalar = typename DerivedFrom::Scalar;
  static_assert(DerivedFrom::RowsAtCompileTime == 3 && DerivedTo::RowsAtCompileTime == 3,
                "kabsch expects 3xN point matrices");
  const Eigen::Index n = from.cols();
  if (n < 3 || to.cols() != n) {
    throw DegenerateConfiguration("kabsch needs at least three matched points");
  }

  const Vector3<Scalar> mean_from = from.rowwise().mean();
  const Vector3<Scalar> mean_to = to.rowwise().mean();
  const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> a = from.colwise() - mean_from;
  const Eigen::Matrix<Scalar, 3, Eigen::Dynamic> b = to.colwise() - mean_to;

  // Collinear sets have a rank-1 scatter.
  const auto spread = [](const Eigen::Matrix<Scalar, 3, Eigen::Dynamic>& m) {
    return Eigen::JacobiSVD<Matrix3<Scalar>>(m * m.transpose()).singularValues();
  };
  const Vector3<Scalar> sa = spread(a);
  const Vector3<Scalar> sb = spread(b);
  const Scalar rel = Scalar(1e-10);
  if (!(sa(1) > rel * sa(0)) || !(sb(1) > rel * sb(0)) || !(sa(0) > Scalar(0))) {
    throw DegenerateConfiguration("kabsch input is collinear or coincident");
  }

  const Matrix3<Scalar> h = a * b.transpose();
  Eigen::JacobiSVD<Matrix3<Scalar>> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3<Scalar> d = Matrix3<Scalar>::Identity();
  d(2, 2) = (svd.matrixV() * svd.matrixU().transpose()).determinant() < Scalar(0) ? Scalar(-1)
                                                                                   : Scalar(1);
  const Matrix3<Scalar> r = svd.matrixV() * d * svd.matrixU().transpose();
  return RigidPose<Scalar>(r, mean_to - r * mean_from);
}

}  // namespace scoreloc
