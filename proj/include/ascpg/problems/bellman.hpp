#pragma once

#include "ascpg/oracle.hpp"
#include "ascpg/problems/mdp.hpp"

#include <vector>

namespace ascpg {

/// Bellman residual minimization as a composition problem.
///
/// Inner map g(w) in R^{2S} interleaves (phi_s^T w, q_s(w)) with
/// q_s(w) = sum_s' P(s,s') (R(s,s') + gamma phi_s'^T w); it is affine in w.
/// Outer f(u) = sum_s (u_{2s} - u_{2s+1})^2 (0-based) is deterministic.
///
/// One inner draw samples one successor s' ~ P(s, .) for every state s and
/// returns the unbiased estimate q_s ~ R(s,s') + gamma phi_s'^T w. With
/// `exact` set the oracle returns expectations (zero noise).
class BellmanOracle {
public:
  BellmanOracle(MdpSpec spec, std::uint64_t seed, bool exact = false)
      : spec_(std::move(spec)), rng_(seed), exact_(exact) {
    validate_mdp(spec_);
    r_ = spec_.expected_reward();
    P_phi_ = spec_.P * spec_.Phi;
    solutions_ = AffineSolutionSet(spec_.residual_matrix(), r_);
    const Index S = spec_.S;
    support_.resize(static_cast<std::size_t>(S));
    cdf_.resize(static_cast<std::size_t>(S));
    for (Index s = 0; s < S; ++s) {
      double acc = 0.0;
      for (Index sp = 0; sp < S; ++sp) {
        if (spec_.P(s, sp) > 0.0) {
          acc += spec_.P(s, sp);
          support_[s].push_back(sp);
          cdf_[s].push_back(acc);
        }
      }
    }
  }

  Index inner_dim() const { return spec_.features(); }
  Index outer_dim() const { return 2 * spec_.S; }
  const MdpSpec& spec() const { return spec_; }
  bool exact() const { return exact_; }

  /// Draw the successor of every state (one draw event).
  std::vector<Index> sample_successors() {
    std::vector<Index> next(static_cast<std::size_t>(spec_.S));
    for (Index s = 0; s < spec_.S; ++s) {
      const auto& cdf = cdf_[s];
      const double u = rng_.uniform() * cdf.back();
      std::size_t j = 0;
      while (j + 1 < cdf.size() && u >= cdf[j]) ++j;
      next[s] = support_[s][j];
    }
    return next;
  }

  InnerSample sample_inner(const Vector& w, InnerParts parts) {
    const Index S = spec_.S;
    const double gamma = spec_.gamma;
    InnerSample out;
    out.seed_tag = draws_++;
    if (exact_) {
      if (parts != InnerParts::jacobian) out.value = inner_value(w);
      if (parts != InnerParts::value) out.jacobian = inner_jacobian(w);
      return out;
    }
    const std::vector<Index> next = sample_successors();
    if (parts != InnerParts::jacobian) {
      const Vector v = spec_.Phi * w;
      out.value.resize(2 * S);
      for (Index s = 0; s < S; ++s) {
        const Index sp = next[s];
        out.value[2 * s] = v[s];
        out.value[2 * s + 1] = spec_.R(s, sp) + gamma * v[sp];
      }
    }
    if (parts != InnerParts::value) {
      const Index d = spec_.features();
      out.jacobian.resize(2 * S, d);
      for (Index j = 0; j < d; ++j) {
        const double* phi = spec_.Phi.col(j).data();
        double* col = out.jacobian.col(j).data();
        for (Index s = 0; s < S; ++s) {
          col[2 * s] = phi[s];
          col[2 * s + 1] = gamma * phi[next[s]];
        }
      }
    }
    return out;
  }

  OuterGradSample sample_outer(const Vector& u) {
    return OuterGradSample{outer_gradient(u), draws_++};
  }

  Vector inner_value(const Vector& w) const {
    const Index S = spec_.S;
    const Vector v = spec_.Phi * w;
    const Vector q = r_ + spec_.gamma * (P_phi_ * w);
    Vector out(2 * S);
    for (Index s = 0; s < S; ++s) {
      out[2 * s] = v[s];
      out[2 * s + 1] = q[s];
    }
    return out;
  }

  Matrix inner_jacobian(const Vector&) const {
    const Index S = spec_.S;
    Matrix J(2 * S, spec_.features());
    for (Index s = 0; s < S; ++s) {
      J.row(2 * s) = spec_.Phi.row(s);
      J.row(2 * s + 1) = spec_.gamma * P_phi_.row(s);
    }
    return J;
  }

  double outer_value(const Vector& u) const {
    double total = 0.0;
    for (Index s = 0; s < spec_.S; ++s) {
      const double diff = u[2 * s] - u[2 * s + 1];
      total += diff * diff;
    }
    return total;
  }

  Vector outer_gradient(const Vector& u) const {
    Vector g(u.size());
    for (Index s = 0; s < spec_.S; ++s) {
      const double diff = 2.0 * (u[2 * s] - u[2 * s + 1]);
      g[2 * s] = diff;
      g[2 * s + 1] = -diff;
    }
    return g;
  }

  Vector project_solution(const Vector& w) const { return solutions_.project(w); }
  const AffineSolutionSet& solution_set() const { return solutions_; }

private:
  MdpSpec spec_;
  Rng rng_;
  bool exact_ = false;
  std::uint64_t draws_ = 0;
  Vector r_;
  Matrix P_phi_;
  AffineSolutionSet solutions_;
  std::vector<std::vector<Index>> support_;
  std::vector<std::vector<double>> cdf_;
};

}  // namespace ascpg
