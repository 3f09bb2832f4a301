#pragma once

#include "ascpg/oracle.hpp"
#include "ascpg/problems/least_squares.hpp"

#include <cstdint>

namespace ascpg {

/// Noise levels of the synthetic linear-inner family.
struct LinearNoise {
  double inner_matrix = 0.0;  // entrywise std of A_w - A
  double inner_offset = 0.0;  // entrywise std of b_w - b
  double outer = 0.0;         // entrywise std of grad f_v - grad f
};

/// Data of the linear-inner composition F(x) = 1/2 ||A x + b||^2 with
/// g_w(x) = A_w x + b_w and f_v(u) = 1/2 ||u||^2 + <zeta_v, u>.
struct LinearProblem {
  Matrix A;  // m x n
  Vector b;  // m
  LinearNoise noise;
};

/// g(x) = x, f = 1/2 ||.||^2; optional additive noise on every sample.
inline LinearProblem identity_problem(Index n, double noise = 0.0) {
  return LinearProblem{Matrix::Identity(n, n), Vector::Zero(n),
                       LinearNoise{noise, noise, noise}};
}

/// Random instance with singular values of A spread evenly over
/// [sv_min, sv_max] and a generic offset b.
inline LinearProblem random_linear_problem(Index n, Index m, LinearNoise noise,
                                           std::uint64_t seed, double sv_min = 1.0,
                                           double sv_max = 2.0) {
  if (m < n) throw std::invalid_argument("random_linear_problem: need m >= n");
  Rng rng(seed);
  auto gaussian = [&](Index r, Index c) {
    Matrix G(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) G(i, j) = rng.normal();
    return G;
  };
  const Matrix U = Eigen::HouseholderQR<Matrix>(gaussian(m, n)).householderQ() *
                   Matrix::Identity(m, n);
  const Matrix V = Eigen::HouseholderQR<Matrix>(gaussian(n, n)).householderQ() *
                   Matrix::Identity(n, n);
  Vector sv(n);
  for (Index i = 0; i < n; ++i) {
    sv[i] = n == 1 ? sv_max : sv_max - (sv_max - sv_min) * i / double(n - 1);
  }
  LinearProblem p;
  p.A = U * sv.asDiagonal() * V.transpose();
  p.b = gaussian(m, 1);
  p.noise = noise;
  return p;
}

class LinearCompositionOracle {
public:
  LinearCompositionOracle(LinearProblem problem, std::uint64_t seed)
      : p_(std::move(problem)),
        rng_(seed),
        solutions_(p_.A, -p_.b) {}

  Index inner_dim() const { return p_.A.cols(); }
  Index outer_dim() const { return p_.A.rows(); }
  const LinearProblem& problem() const { return p_; }

  InnerSample sample_inner(const Vector& x, InnerParts parts) {
    const Index m = outer_dim(), n = inner_dim();
    InnerSample s;
    s.seed_tag = draws_++;
    Matrix Aw = p_.A;
    Vector bw = p_.b;
    if (p_.noise.inner_matrix != 0.0) {
      for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < m; ++i) Aw(i, j) += p_.noise.inner_matrix * rng_.normal();
    }
    if (p_.noise.inner_offset != 0.0) {
      for (Index i = 0; i < m; ++i) bw[i] += p_.noise.inner_offset * rng_.normal();
    }
    if (parts != InnerParts::jacobian) s.value = Aw * x + bw;
    if (parts != InnerParts::value) s.jacobian = std::move(Aw);
    return s;
  }

  OuterGradSample sample_outer(const Vector& y) {
    OuterGradSample s;
    s.seed_tag = draws_++;
    s.grad = y;
    if (p_.noise.outer != 0.0) {
      for (Index i = 0; i < y.size(); ++i) s.grad[i] += p_.noise.outer * rng_.normal();
    }
    return s;
  }

  Vector inner_value(const Vector& x) const { return p_.A * x + p_.b; }
  Matrix inner_jacobian(const Vector&) const { return p_.A; }
  double outer_value(const Vector& u) const { return 0.5 * u.squaredNorm(); }
  Vector outer_gradient(const Vector& u) const { return u; }
  Vector project_solution(const Vector& x) const { return solutions_.project(x); }

  const AffineSolutionSet& solution_set() const { return solutions_; }

private:
  LinearProblem p_;
  Rng rng_;
  std::uint64_t draws_ = 0;
  AffineSolutionSet solutions_;
};

}  // namespace ascpg
