#pragma once

#include "ascpg/oracle.hpp"

#include <cstdint>

namespace ascpg {

/// Finite dataset for the loss h(x; a, b) = (a^T x - b)^2.
struct MeanVarianceData {
  Matrix A;  // N x dim, row i is a_i
  Vector b;  // N
};

/// a_i ~ N(0, I), b_i = a_i^T x_true + noise * N(0, 1), with x_true ~
/// N(0, I / dim).
inline MeanVarianceData make_mean_variance_data(Index dim, Index samples,
                                                std::uint64_t data_seed,
                                                double noise = 0.5) {
  if (dim < 1 || samples < 1) {
    throw std::invalid_argument("mean-variance data: need dim >= 1 and N >= 1");
  }
  Rng rng(data_seed);
  Vector x_true(dim);
  for (Index j = 0; j < dim; ++j) x_true[j] = rng.normal() / std::sqrt(double(dim));
  MeanVarianceData data;
  data.A.resize(samples, dim);
  data.b.resize(samples);
  for (Index i = 0; i < samples; ++i) {
    for (Index j = 0; j < dim; ++j) data.A(i, j) = rng.normal();
    data.b[i] = data.A.row(i).dot(x_true) + noise * rng.normal();
  }
  return data;
}

/// Mean-variance risk E[h] + lambda Var[h] over a finite dataset, written as
/// f(g(x)) with g(x) = (E h, E h^2) and f(u1, u2) = u1 + lambda (u2 - u1^2).
/// The oracle draws one data index uniformly per inner query; f is
/// deterministic.
class MeanVarianceOracle {
public:
  MeanVarianceOracle(MeanVarianceData data, double lambda, std::uint64_t seed)
      : data_(std::move(data)), lambda_(lambda), rng_(seed) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("mean-variance: lambda must be >= 0");
    if (data_.A.rows() != data_.b.size() || data_.A.rows() < 1) {
      throw std::invalid_argument("mean-variance: inconsistent data");
    }
    solution_ = minimize();
  }

  Index inner_dim() const { return data_.A.cols(); }
  Index outer_dim() const { return 2; }
  double lambda() const { return lambda_; }
  const MeanVarianceData& data() const { return data_; }
  Index samples() const { return data_.A.rows(); }

  InnerSample sample_inner(const Vector& x, InnerParts parts) {
    InnerSample s;
    s.seed_tag = draws_++;
    const Index i = rng_.index(samples());
    const double r = data_.A.row(i).dot(x) - data_.b[i];
    const double h = r * r;
    if (parts != InnerParts::jacobian) s.value = Eigen::Vector2d(h, h * h);
    if (parts != InnerParts::value) {
      s.jacobian.resize(2, inner_dim());
      s.jacobian.row(0) = 2.0 * r * data_.A.row(i);
      s.jacobian.row(1) = 4.0 * h * r * data_.A.row(i);
    }
    return s;
  }

  OuterGradSample sample_outer(const Vector& u) {
    return OuterGradSample{outer_gradient(u), draws_++};
  }

  Vector inner_value(const Vector& x) const {
    const Vector h = (data_.A * x - data_.b).array().square();
    return Eigen::Vector2d(h.mean(), h.array().square().mean());
  }

  Matrix inner_jacobian(const Vector& x) const {
    const Vector r = data_.A * x - data_.b;
    const double n = double(samples());
    Matrix J(2, inner_dim());
    J.row(0) = (2.0 / n) * (data_.A.transpose() * r).transpose();
    J.row(1) = (4.0 / n) * (data_.A.transpose() * r.array().cube().matrix()).transpose();
    return J;
  }

  double outer_value(const Vector& u) const { return u[0] + lambda_ * (u[1] - u[0] * u[0]); }

  Vector outer_gradient(const Vector& u) const {
    return Eigen::Vector2d(1.0 - 2.0 * lambda_ * u[0], lambda_);
  }

  /// Exact Hessian of F at x.
  Matrix hessian(const Vector& x) const {
    const Vector r = data_.A * x - data_.b;
    const double n = double(samples());
    const double m1 = r.squaredNorm() / n;
    const Vector grad_m1 = (2.0 / n) * data_.A.transpose() * r;
    const Matrix hess_m1 = (2.0 / n) * data_.A.transpose() * data_.A;
    const Vector w = (12.0 / n) * r.array().square().matrix();
    const Matrix hess_m2 = data_.A.transpose() * w.asDiagonal() * data_.A;
    return hess_m1 + lambda_ * (hess_m2 - 2.0 * grad_m1 * grad_m1.transpose() -
                                2.0 * m1 * hess_m1);
  }

  /// Unique minimizer when F is strongly convex (checked on construction).
  const Vector& solution() const { return solution_; }
  Vector project_solution(const Vector&) const { return solution_; }

  double min_hessian_eigenvalue() const {
    return Eigen::SelfAdjointEigenSolver<Matrix>(hessian(solution_)).eigenvalues().minCoeff();
  }

private:
  // Damped Newton from the least-squares point.
  Vector minimize() const {
    Vector x = data_.A.colPivHouseholderQr().solve(data_.b);
    auto F = [&](const Vector& v) { return outer_value(inner_value(v)); };
    for (int it = 0; it < 200; ++it) {
      const Vector g = inner_jacobian(x).transpose() * outer_gradient(inner_value(x));
      if (g.norm() < 1e-14 * (1.0 + x.norm())) break;
      const Matrix H = hessian(x);
      Eigen::LDLT<Matrix> ldlt(H);
      Vector dir = (ldlt.info() == Eigen::Success && ldlt.isPositive())
                       ? Vector(-ldlt.solve(g))
                       : Vector(-g);
      double t = 1.0;
      const double f0 = F(x);
      while (t > 1e-12 && F(x + t * dir) > f0 + 1e-4 * t * g.dot(dir)) t *= 0.5;
      x += t * dir;
    }
    return x;
  }

  MeanVarianceData data_;
  double lambda_;
  Rng rng_;
  std::uint64_t draws_ = 0;
  Vector solution_;
};

inline MeanVarianceOracle mean_variance_oracle(Index dim, double lambda,
                                               std::uint64_t data_seed,
                                               std::uint64_t seed, Index samples = 50) {
  return MeanVarianceOracle(make_mean_variance_data(dim, samples, data_seed), lambda, seed);
}

}  // namespace ascpg
