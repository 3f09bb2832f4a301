#pragma once

#include "ascpg/types.hpp"

namespace ascpg {

/// Solution set of min_x ||M x - t||^2: the affine set
/// x_mn + null(M), where x_mn is the minimum-norm minimizer.
class AffineSolutionSet {
public:
  AffineSolutionSet() = default;

  AffineSolutionSet(const Matrix& M, const Vector& t, double rel_tol = 1e-10) {
    Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const double cutoff = sv.size() > 0 ? rel_tol * sv[0] : 0.0;
    rank_ = 0;
    while (rank_ < sv.size() && sv[rank_] > cutoff) ++rank_;

    const Matrix Ur = svd.matrixU().leftCols(rank_);
    const Matrix Vr = svd.matrixV().leftCols(rank_);
    const Vector inv = sv.head(rank_).cwiseInverse();
    min_norm_ = Vr * inv.asDiagonal() * (Ur.transpose() * t);
    row_space_ = Vr;
    smallest_sv_ = rank_ > 0 ? sv[rank_ - 1] : 0.0;
    largest_sv_ = sv.size() > 0 ? sv[0] : 0.0;
  }

  const Vector& min_norm_solution() const { return min_norm_; }

  /// Euclidean projection onto x_mn + null(M).
  Vector project(const Vector& x) const {
    return min_norm_ + (x - row_space_ * (row_space_.transpose() * x));
  }

  Index rank() const { return rank_; }
  /// Smallest nonzero singular value of M.
  double smallest_singular_value() const { return smallest_sv_; }
  double largest_singular_value() const { return largest_sv_; }

private:
  Vector min_norm_;
  Matrix row_space_;  // orthonormal basis of range(M^T)
  Index rank_ = 0;
  double smallest_sv_ = 0.0;
  double largest_sv_ = 0.0;
};

}  // namespace ascpg
