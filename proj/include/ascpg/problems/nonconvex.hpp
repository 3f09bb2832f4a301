#pragma once

#include "ascpg/oracle.hpp"

#include <cstdint>

namespace ascpg {

/// Small smooth nonconvex composition with a nonlinear inner map:
///   g_w(x) = (A + s E_w) tanh(x) + c + s e_w
///   f_v(u) = sum_j log(1 + (u_j - t_j)^2),  grad f_v = grad f + s zeta_v
/// Both levels have bounded gradients; F is bounded below by 0.
struct NonconvexProblem {
  Matrix A;  // m x n
  Vector c;  // m
  Vector t;  // m
  double noise = 0.1;
};

inline NonconvexProblem random_nonconvex_problem(Index n, Index m, std::uint64_t seed,
                                                 double noise = 0.1) {
  Rng rng(seed);
  NonconvexProblem p;
  p.A.resize(m, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < m; ++i) p.A(i, j) = rng.normal();
  p.c.resize(m);
  p.t.resize(m);
  for (Index i = 0; i < m; ++i) p.c[i] = rng.normal();
  for (Index i = 0; i < m; ++i) p.t[i] = 2.0 * rng.normal();
  p.noise = noise;
  return p;
}

class NonconvexOracle {
public:
  NonconvexOracle(NonconvexProblem problem, std::uint64_t seed)
      : p_(std::move(problem)), rng_(seed) {}

  Index inner_dim() const { return p_.A.cols(); }
  Index outer_dim() const { return p_.A.rows(); }

  InnerSample sample_inner(const Vector& x, InnerParts parts) {
    const Index m = outer_dim(), n = inner_dim();
    InnerSample s;
    s.seed_tag = draws_++;
    Matrix Aw = p_.A;
    Vector cw = p_.c;
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < m; ++i) Aw(i, j) += p_.noise * rng_.normal();
    for (Index i = 0; i < m; ++i) cw[i] += p_.noise * rng_.normal();
    const Vector th = x.array().tanh();
    if (parts != InnerParts::jacobian) s.value = Aw * th + cw;
    if (parts != InnerParts::value) {
      const Vector sech2 = 1.0 - th.array().square();
      s.jacobian = Aw * sech2.asDiagonal();
    }
    return s;
  }

  OuterGradSample sample_outer(const Vector& u) {
    OuterGradSample s;
    s.seed_tag = draws_++;
    s.grad = outer_gradient(u);
    for (Index i = 0; i < u.size(); ++i) s.grad[i] += p_.noise * rng_.normal();
    return s;
  }

  Vector inner_value(const Vector& x) const {
    return p_.A * Vector(x.array().tanh()) + p_.c;
  }

  Matrix inner_jacobian(const Vector& x) const {
    const Vector sech2 = 1.0 - x.array().tanh().square();
    return p_.A * sech2.asDiagonal();
  }

  double outer_value(const Vector& u) const {
    return (1.0 + (u - p_.t).array().square()).log().sum();
  }

  Vector outer_gradient(const Vector& u) const {
    const Eigen::ArrayXd d = (u - p_.t).array();
    return (2.0 * d / (1.0 + d.square())).matrix();
  }

private:
  NonconvexProblem p_;
  Rng rng_;
  std::uint64_t draws_ = 0;
};

}  // namespace ascpg
