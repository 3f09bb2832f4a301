#pragma once

// Property checks on oracles: unbiasedness and bounded variance of samples,
// gradient agreement with finite differences, affine inner maps, solution-set
// structure and seed reproducibility.

#include "ascpg/experiment.hpp"
#include "ascpg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace ascpg {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct VerifyOptions {
  int points = 5;           // random evaluation points per check
  int draws = 10000;        // Monte-Carlo draws per point
  double z = 4.0;           // standard errors allowed per component
  double family_alpha = 1e-3;
  double point_scale = 1.0;
  double fd_step = 1e-6;
  double fd_rel_tol = 1e-4;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

inline Vector random_point(Rng& rng, Index n, double scale) {
  Vector x(n);
  for (Index i = 0; i < n; ++i) x[i] = scale * rng.normal();
  return x;
}

// Upper standard-normal quantile via bisection on erfc.
inline double normal_upper_quantile(double p) {
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(mid / std::sqrt(2.0)) > p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Per-component threshold: the configured z, widened to a Bonferroni bound
// at level family_alpha when many components are tested at once.
inline double component_threshold(const VerifyOptions& o, std::size_t components) {
  const double bonf = normal_upper_quantile(o.family_alpha / (2.0 * double(components)));
  return std::max(o.z, bonf);
}

struct MomentCheck {
  double worst_z = 0.0;
  bool pass = true;
  double var_first = 0.0;   // E||s - truth||^2, first half of the draws
  double var_second = 0.0;  // same, second half
};

// Compare the sample mean of `draw()` to `truth` componentwise.
template <class Draw>
MomentCheck moment_check(Draw&& draw, const Vector& truth, int draws, double threshold) {
  const Index m = truth.size();
  Vector mean = Vector::Zero(m), m2 = Vector::Zero(m);
  MomentCheck out;
  for (int i = 0; i < draws; ++i) {
    const Vector s = draw();
    const Vector delta = s - mean;
    mean += delta / double(i + 1);
    m2 += delta.cwiseProduct(s - mean);
    (i < draws / 2 ? out.var_first : out.var_second) += (s - truth).squaredNorm();
  }
  out.var_first /= double(draws / 2);
  out.var_second /= double(draws - draws / 2);
  for (Index j = 0; j < m; ++j) {
    const double se = std::sqrt(m2[j] / double(draws - 1) / double(draws));
    const double err = std::abs(mean[j] - truth[j]);
    const double slack = 1e-12 * (1.0 + std::abs(truth[j]));
    if (err > threshold * se + slack) out.pass = false;
    if (se > 0.0) out.worst_z = std::max(out.worst_z, err / se);
  }
  return out;
}

}  // namespace detail

/// Mean of inner values over many draws matches g(x) at random points, and
/// E||g_w(x) - g(x)||^2 is finite and agrees between the two halves of the
/// draws. Returns the unbiasedness and variance checks.
template <HasTruth O>
std::vector<CheckResult> check_inner_samples(O& oracle, const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 11));
  const double thr = detail::component_threshold(o, std::size_t(oracle.outer_dim()) * o.points);
  CheckResult unbiased{"inner samples unbiased", true, {}};
  CheckResult variance{"inner variance bounded", true, {}};
  double worst = 0.0, vmin = INFINITY, vmax = 0.0;
  for (int p = 0; p < o.points; ++p) {
    const Vector x = detail::random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector g = oracle.inner_value(x);
    auto mc = detail::moment_check(
        [&] { return oracle.sample_inner(x, InnerParts::value).value; }, g, o.draws, thr);
    worst = std::max(worst, mc.worst_z);
    unbiased.pass = unbiased.pass && mc.pass;
    const double lo = std::min(mc.var_first, mc.var_second);
    const double hi = std::max(mc.var_first, mc.var_second);
    const bool stable = std::isfinite(hi) && (hi <= 1e-24 || hi <= 2.0 * lo);
    variance.pass = variance.pass && stable;
    vmin = std::min(vmin, 0.5 * (lo + hi));
    vmax = std::max(vmax, 0.5 * (lo + hi));
  }
  unbiased.detail = "max |mean - g| / stderr = " + detail::fmt(worst) + " (limit " +
                    detail::fmt(thr) + ")";
  variance.detail = "E||g_w - g||^2 in [" + detail::fmt(vmin) + ", " + detail::fmt(vmax) + "]";
  return {unbiased, variance};
}

/// Mean of outer-gradient draws at y = g(x) matches grad f(y).
template <HasTruth O>
CheckResult check_outer_samples(O& oracle, const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 12));
  const double thr = detail::component_threshold(o, std::size_t(oracle.outer_dim()) * o.points);
  CheckResult r{"outer gradient samples unbiased", true, {}};
  double worst = 0.0;
  for (int p = 0; p < o.points; ++p) {
    const Vector y = oracle.inner_value(detail::random_point(pts, oracle.inner_dim(), o.point_scale));
    auto mc = detail::moment_check([&] { return oracle.sample_outer(y).grad; },
                                   oracle.outer_gradient(y), o.draws, thr);
    worst = std::max(worst, mc.worst_z);
    r.pass = r.pass && mc.pass;
  }
  r.detail = "max |mean - grad f| / stderr = " + detail::fmt(worst);
  return r;
}

/// Central differences of F against grad g^T grad f(g).
template <HasTruth O>
CheckResult check_gradient_fd(const O& oracle, const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 13));
  CheckResult r{"gradient matches finite differences", true, {}};
  double worst = 0.0;
  for (int p = 0; p < o.points; ++p) {
    const Vector x = detail::random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector grad = true_gradient(x, oracle);
    Vector fd(x.size());
    for (Index i = 0; i < x.size(); ++i) {
      const double h = o.fd_step * std::max(1.0, std::abs(x[i]));
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      fd[i] = (true_objective(xp, oracle) - true_objective(xm, oracle)) / (2.0 * h);
    }
    const double rel = (fd - grad).norm() / std::max(grad.norm(), 1e-8);
    worst = std::max(worst, rel);
    if (!(rel <= o.fd_rel_tol)) r.pass = false;
  }
  r.detail = "max relative error " + detail::fmt(worst);
  return r;
}

/// g(x1 + x2) - g(0) = (g(x1) - g(0)) + (g(x2) - g(0)) and a constant
/// Jacobian, up to rounding.
template <HasTruth O>
CheckResult check_inner_affine(const O& oracle, const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 14));
  CheckResult r{"inner map affine", true, {}};
  const Vector g0 = oracle.inner_value(Vector::Zero(oracle.inner_dim()));
  const Matrix J0 = oracle.inner_jacobian(Vector::Zero(oracle.inner_dim()));
  double worst = 0.0;
  for (int p = 0; p < o.points; ++p) {
    const Vector x1 = detail::random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector x2 = detail::random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector lhs = oracle.inner_value(x1 + x2) - g0;
    const Vector rhs = (oracle.inner_value(x1) - g0) + (oracle.inner_value(x2) - g0);
    const double scale = 1.0 + lhs.cwiseAbs().maxCoeff() + g0.cwiseAbs().maxCoeff();
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() / scale);
    if ((oracle.inner_jacobian(x1) - J0).cwiseAbs().maxCoeff() != 0.0) r.pass = false;
  }
  if (!(worst <= 1e-12)) r.pass = false;
  r.detail = "max scaled deviation " + detail::fmt(worst);
  return r;
}

/// Two oracles with the same seed emit identical streams.
template <class Factory>
CheckResult check_reproducible(Factory make, const VerifyOptions& o, int steps = 50) {
  auto a = make(o.seed);
  auto b = make(o.seed);
  Rng pts(derive_seed(o.seed, 15));
  CheckResult r{"oracle reproducible", true, {}};
  for (int i = 0; i < steps; ++i) {
    const Vector x = detail::random_point(pts, a.inner_dim(), o.point_scale);
    const Vector y = detail::random_point(pts, a.outer_dim(), o.point_scale);
    const InnerSample sa = a.sample_inner(x, InnerParts::both);
    const InnerSample sb = b.sample_inner(x, InnerParts::both);
    const OuterGradSample ga = a.sample_outer(y);
    const OuterGradSample gb = b.sample_outer(y);
    if (sa.value != sb.value || sa.jacobian != sb.jacobian || ga.grad != gb.grad ||
        sa.seed_tag != sb.seed_tag || ga.seed_tag != gb.seed_tag) {
      r.pass = false;
      r.detail = "streams differ at draw " + std::to_string(i);
      return r;
    }
  }
  r.detail = std::to_string(steps) + " draw pairs identical";
  return r;
}

/// P_X* is idempotent and grad F vanishes on X*.
template <HasSolutionSet O>
CheckResult check_solution_set(const O& oracle, const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 16));
  CheckResult r{"solution set projection optimal", true, {}};
  double worst_idem = 0.0, worst_grad = 0.0;
  for (int p = 0; p < o.points; ++p) {
    const Vector x = detail::random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector px = oracle.project_solution(x);
    const Vector ppx = oracle.project_solution(px);
    worst_idem = std::max(worst_idem, (ppx - px).norm() / (1.0 + px.norm()));
    const double gscale = 1.0 + true_gradient(x, oracle).norm();
    worst_grad = std::max(worst_grad, true_gradient(px, oracle).norm() / gscale);
  }
  r.pass = worst_idem <= 1e-10 && worst_grad <= 1e-8;
  r.detail = "idempotence " + detail::fmt(worst_idem) + ", scaled |grad F| on X* " +
             detail::fmt(worst_grad);
  return r;
}

/// H(x) - H(P(x)) >= lambda ||x - P(x)||^2 with the given modulus.
template <HasSolutionSet O>
CheckResult check_optimal_strong_convexity(const O& oracle, double modulus,
                                           const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 17));
  CheckResult r{"optimally strongly convex", true, {}};
  double worst = INFINITY;
  for (int p = 0; p < o.points; ++p) {
    const Vector x = detail::random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector px = oracle.project_solution(x);
    const double d2 = (x - px).squaredNorm();
    const double gap = true_objective(x, oracle) - true_objective(px, oracle);
    if (d2 <= 0.0) continue;
    worst = std::min(worst, gap / d2);
    if (gap < modulus * d2 * (1.0 - 1e-9) - 1e-12) r.pass = false;
  }
  r.detail = "min gap / dist^2 = " + detail::fmt(worst) + " vs modulus " + detail::fmt(modulus);
  return r;
}

// ---------------------------------------------------------------------------
// Family-level suites

inline std::vector<CheckResult> mdp_checks(const MdpSpec& spec) {
  std::vector<CheckResult> out;
  for (const auto& c : check_mdp(spec)) out.push_back({c.name, c.pass, c.detail});
  return out;
}

namespace detail {

inline void append(std::vector<CheckResult>& out, std::vector<CheckResult> more) {
  for (auto& c : more) out.push_back(std::move(c));
}

inline CheckResult mean_variance_composition(const MeanVarianceOracle& oracle,
                                             const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 18));
  CheckResult r{"composition equals mean + lambda variance", true, {}};
  double worst = 0.0;
  const auto& data = oracle.data();
  for (int p = 0; p < o.points; ++p) {
    const Vector x = random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector h = (data.A * x - data.b).array().square();
    const double mean = h.mean();
    const double var = (h.array() - mean).square().mean();
    const double direct = mean + oracle.lambda() * var;
    const double composed = true_objective(x, oracle);
    worst = std::max(worst, std::abs(direct - composed) / (1.0 + std::abs(direct)));
  }
  r.pass = worst <= 1e-10;
  r.detail = "max relative deviation " + fmt(worst);
  return r;
}

inline CheckResult mean_variance_least_squares(const MeanVarianceOracle& oracle,
                                               const VerifyOptions& o) {
  Rng pts(derive_seed(o.seed, 19));
  CheckResult r{"gradient matches least-squares gradient", true, {}};
  double worst = 0.0;
  const auto& data = oracle.data();
  for (int p = 0; p < o.points; ++p) {
    const Vector x = random_point(pts, oracle.inner_dim(), o.point_scale);
    const Vector ls = (2.0 / double(oracle.samples())) * data.A.transpose() * (data.A * x - data.b);
    worst = std::max(worst, (true_gradient(x, oracle) - ls).norm() / (1.0 + ls.norm()));
  }
  r.pass = worst <= 1e-10;
  r.detail = "max relative deviation " + fmt(worst);
  return r;
}

}  // namespace detail

/// Runs every check that applies to the configured problem family.
inline std::vector<CheckResult> verify_problem(const ProblemConfig& p, const VerifyOptions& o) {
  std::vector<CheckResult> out;
  if (is_mdp_family(p.family)) {
    const MdpSpec spec = build_mdp(p);
    out = mdp_checks(spec);
    for (const auto& c : out) {
      if (!c.pass) return out;  // the oracle cannot be built on a broken model
    }
    BellmanOracle oracle(spec, o.seed, p.exact);
    detail::append(out, check_inner_samples(oracle, o));
    out.push_back(check_outer_samples(oracle, o));
    out.push_back(check_inner_affine(oracle, o));
    out.push_back(check_gradient_fd(oracle, o));
    out.push_back(check_solution_set(oracle, o));
    const double sv = oracle.solution_set().smallest_singular_value();
    out.push_back(check_optimal_strong_convexity(oracle, sv * sv, o));
    out.push_back(check_reproducible(
        [&](std::uint64_t s) { return BellmanOracle(spec, s, p.exact); }, o));
    return out;
  }
  with_problem(p, [&](auto factory) {
    auto oracle = factory(o.seed);
    using O = decltype(oracle);
    detail::append(out, check_inner_samples(oracle, o));
    out.push_back(check_outer_samples(oracle, o));
    out.push_back(check_gradient_fd(oracle, o));
    if constexpr (std::is_same_v<O, LinearCompositionOracle>) {
      out.push_back(check_inner_affine(oracle, o));
      out.push_back(check_solution_set(oracle, o));
      const double sv = oracle.solution_set().smallest_singular_value();
      out.push_back(check_optimal_strong_convexity(oracle, 0.5 * sv * sv, o));
    }
    if constexpr (std::is_same_v<O, MeanVarianceOracle>) {
      out.push_back(detail::mean_variance_composition(oracle, o));
      if (oracle.lambda() == 0.0) out.push_back(detail::mean_variance_least_squares(oracle, o));
      const double eig = oracle.min_hessian_eigenvalue();
      out.push_back({"strongly convex at solution", eig > 0.0,
                     "min Hessian eigenvalue " + detail::fmt(eig)});
      const double g = true_gradient(oracle.solution(), oracle).norm();
      out.push_back({"solution stationary", g <= 1e-8, "|grad F(x*)| = " + detail::fmt(g)});
    }
    out.push_back(check_reproducible(factory, o));
    return 0;
  });
  return out;
}

}  // namespace ascpg
