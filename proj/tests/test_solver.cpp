#include "ascpg/harness.hpp"
#include "ascpg/metrics.hpp"
#include "ascpg/problems/bellman.hpp"
#include "ascpg/problems/linear.hpp"
#include "ascpg/solver.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

using namespace ascpg;

namespace {

// S = 2, d = 1: the residual problem is a genuine least-squares fit.
MdpSpec two_state_chain() {
  MdpSpec spec;
  spec.S = 2;
  spec.P.resize(2, 2);
  spec.P << 0.3, 0.7, 0.6, 0.4;
  spec.R.resize(2, 2);
  spec.R << 1.0, 0.0, 0.5, 2.0;
  spec.gamma = 0.9;
  spec.Phi.resize(2, 1);
  spec.Phi << 1.0, 2.0;
  return spec;
}

// x* of min ||E[A] x - E[b]||^2 from the normal equations.
Vector normal_equation_solution(const MdpSpec& spec) {
  Matrix M = spec.Phi;
  Vector r(spec.S);
  for (Index s = 0; s < spec.S; ++s) {
    r[s] = 0.0;
    for (Index sp = 0; sp < spec.S; ++sp) {
      M.row(s) -= spec.gamma * spec.P(s, sp) * spec.Phi.row(sp);
      r[s] += spec.P(s, sp) * spec.R(s, sp);
    }
  }
  return (M.transpose() * M).ldlt().solve(M.transpose() * r);
}

// Forwards to an oracle and keeps every inner value it hands out.
template <class O>
struct RecordingOracle {
  O inner;
  std::vector<Vector> values;
  Index inner_dim() const { return inner.inner_dim(); }
  Index outer_dim() const { return inner.outer_dim(); }
  InnerSample sample_inner(const Vector& x, InnerParts parts) {
    InnerSample s = inner.sample_inner(x, parts);
    if (parts == InnerParts::value) values.push_back(s.value);
    return s;
  }
  OuterGradSample sample_outer(const Vector& y) { return inner.sample_outer(y); }
};

void expect_same_trace(const RunTrace& a, const RunTrace& b) {
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    EXPECT_EQ(ra.k, rb.k);
    EXPECT_EQ(ra.queries, rb.queries);
    EXPECT_EQ(ra.dist, rb.dist);
    EXPECT_EQ(ra.grad_norm_sq, rb.grad_norm_sq);
    EXPECT_EQ(ra.tracking_err_sq, rb.tracking_err_sq);
    EXPECT_EQ(ra.step_len, rb.step_len);
    EXPECT_EQ(ra.objective, rb.objective);
  }
  ASSERT_EQ(a.final_x.size(), b.final_x.size());
  EXPECT_EQ(0, std::memcmp(a.final_x.data(), b.final_x.data(),
                           sizeof(double) * static_cast<std::size_t>(a.final_x.size())));
}

SolverConfig noisy_config(Method method, std::uint64_t iters) {
  SolverConfig cfg;
  cfg.method = method;
  cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_general, 1.0, 2.0);
  cfg.max_iters = iters;
  return cfg;
}

const LinearProblem& noisy_linear() {
  static const LinearProblem p = random_linear_problem(5, 8, {0.1, 0.1, 0.1}, 7);
  return p;
}

}  // namespace

TEST(Solver, StepIsGradientDescentWithoutSmoothing) {
  LinearCompositionOracle o(identity_problem(1), 0);
  SolverConfig cfg;
  cfg.schedule = Schedule{0.5, 1.0, 1.0, 1.0, true};
  cfg.x1 = Vector::Ones(1);
  SolverState s = initial_state(o, cfg);
  EXPECT_EQ(s.y, Vector::Ones(1));
  const SolverState next = ascpg_step(s, o, cfg);
  EXPECT_EQ(next.x[0], 0.5);
  EXPECT_EQ(next.z, next.x);
  EXPECT_EQ(next.y, next.x);
  EXPECT_EQ(next.k, 2u);
  EXPECT_EQ(next.oracle_queries, 4u);
}

TEST(Solver, UnitBetaMakesExtrapolationTrivial) {
  LinearCompositionOracle o(noisy_linear(), 3);
  SolverConfig cfg;
  cfg.schedule = Schedule{1.0, 1.0, 1e9, 0.01, true};
  SolverState s = initial_state(o, cfg);
  for (int i = 0; i < 20; ++i) {
    s = ascpg_step(s, o, cfg);
    EXPECT_EQ(s.z, s.x);
  }
}

TEST(Solver, UnitBetaMakesScgdMatchAscpg) {
  SolverConfig cfg = noisy_config(Method::ascpg, 500);
  cfg.schedule = Schedule{1.0, 1.0, 1e9, 0.01, true};
  LinearCompositionOracle a(noisy_linear(), 11), b(noisy_linear(), 11);
  const RunTrace ta = run(a, cfg);
  cfg.method = Method::scgd;
  const RunTrace tb = run(b, cfg);
  expect_same_trace(ta, tb);
}

TEST(Solver, ExactBellmanConvergesToNormalEquationSolution) {
  const MdpSpec spec = two_state_chain();
  const Vector x_star = normal_equation_solution(spec);
  const Matrix M = spec.residual_matrix();
  const double curvature = 2.0 * (M.transpose() * M)(0, 0);
  for (Method method : {Method::ascpg, Method::scgd}) {
    BellmanOracle o(spec, 0, true);
    SolverConfig cfg;
    cfg.method = method;
    cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_linear, 1.0 / curvature, 1.0);
    cfg.max_iters = 100000;
    cfg.trace_stride = 1000;
    const RunTrace t = run(o, cfg);
    EXPECT_LE((t.final_x - x_star).norm(), 1e-3) << to_string(method);
    EXPECT_LE((o.project_solution(Vector::Zero(1)) - x_star).norm(), 1e-12);
  }
}

TEST(Solver, ExactOracleDescendsMonotonically) {
  const MdpSpec spec = build_random_mdp({8, 3, 2, 3, 0.9}, 5);
  BellmanOracle o(spec, 0, true);
  SolverConfig cfg;
  cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_linear, 0.05, 1.0);
  cfg.max_iters = 2000;
  cfg.x1 = Vector::Constant(3, 3.0);
  const RunTrace t = run(o, cfg);
  for (std::size_t i = 1; i < t.records.size(); ++i) {
    EXPECT_LE(*t.records[i].objective, *t.records[i - 1].objective + 1e-12);
    EXPECT_LE(*t.records[i].tracking_err_sq, 1e-20);
  }
}

TEST(Solver, QueryAccounting) {
  LinearCompositionOracle o(noisy_linear(), 1);
  SolverConfig cfg = noisy_config(Method::ascpg, 1);
  const RunTrace t = run(o, cfg);
  ASSERT_EQ(t.records.size(), 1u);
  EXPECT_EQ(t.records[0].k, 1u);
  EXPECT_EQ(t.records[0].queries, 4u);
  EXPECT_EQ(t.oracle_queries, 4u);
  EXPECT_TRUE(t.records[0].dist && t.records[0].grad_norm_sq && t.records[0].tracking_err_sq &&
              t.records[0].objective);
  cfg.warm_start_y = false;
  LinearCompositionOracle o2(noisy_linear(), 1);
  EXPECT_EQ(run(o2, cfg).oracle_queries, 3u);
  cfg.max_iters = 10;
  cfg.trace_stride = 4;
  LinearCompositionOracle o3(noisy_linear(), 1);
  const RunTrace strided = run(o3, cfg);
  ASSERT_EQ(strided.records.size(), 3u);
  EXPECT_EQ(strided.records[1].k, 5u);
  EXPECT_EQ(strided.records[2].k, 9u);
  EXPECT_EQ(strided.records[2].queries, 27u);
  EXPECT_EQ(strided.iterations, 10u);
}

TEST(Solver, StationaryWhenStartedAtOptimum) {
  LinearCompositionOracle o(identity_problem(2), 0);
  SolverConfig cfg = noisy_config(Method::ascpg, 50);
  const RunTrace t = run(o, cfg);
  for (const auto& r : t.records) {
    EXPECT_EQ(r.step_len, 0.0);
    EXPECT_EQ(*r.dist, 0.0);
    EXPECT_EQ(*r.objective, 0.0);
  }
  EXPECT_EQ(t.final_x, Vector::Zero(2));
}

TEST(Solver, ExtrapolationIdentityHoldsEveryStep) {
  LinearCompositionOracle o(noisy_linear(), 2);
  const SolverConfig cfg = noisy_config(Method::ascpg, 0);
  SolverState s = initial_state(o, cfg);
  for (int i = 0; i < 1000; ++i) {
    const double b = cfg.schedule.beta(s.k);
    const SolverState next = ascpg_step(s, o, cfg);
    const Vector recon = b * next.z + (1.0 - b) * s.x;
    EXPECT_LE((next.x - recon).cwiseAbs().maxCoeff(), 1e-10) << "k=" << s.k;
    s = next;
  }
}

TEST(Solver, SmoothedValueIsWeightedSampleHistory) {
  for (Method method : {Method::ascpg, Method::scgd}) {
    for (std::uint64_t K : {1u, 17u, 200u}) {
      RecordingOracle<LinearCompositionOracle> o{LinearCompositionOracle(noisy_linear(), 4), {}};
      const SolverConfig cfg = noisy_config(method, K);
      SolverState s = initial_state(o, cfg);
      for (std::uint64_t k = 0; k < K; ++k) s = detail::step(s, o, cfg, method == Method::ascpg);
      ASSERT_EQ(o.values.size(), K + 1);  // warm start + one per iteration
      const auto xi = weights(cfg.schedule, K - 1);
      Vector replay = Vector::Zero(o.outer_dim());
      for (std::uint64_t t = 0; t < K; ++t) replay += xi[t] * o.values[t + 1];
      EXPECT_LE((s.y - replay).cwiseAbs().maxCoeff(), 1e-8) << "K=" << K;
    }
  }
}

TEST(Solver, ZeroRegularizerGivesPlainQuasiGradientStep) {
  LinearCompositionOracle a(noisy_linear(), 6), b(noisy_linear(), 6);
  const SolverConfig cfg = noisy_config(Method::ascpg, 0);
  SolverState s = initial_state(a, cfg);
  SolverState m = initial_state(b, cfg);
  for (int i = 0; i < 100; ++i) {
    const double alpha = cfg.schedule.alpha(s.k);
    const SolverState next = ascpg_step(s, a, cfg);
    const Matrix J = b.sample_inner(m.x, InnerParts::jacobian).jacobian;
    const Vector grad = b.sample_outer(m.y).grad;
    const Vector x = m.x - alpha * (J.transpose() * grad);
    ASSERT_EQ(0, std::memcmp(next.x.data(), x.data(), sizeof(double) * x.size()));
    b.sample_inner(next.z, InnerParts::value);
    m = next;
    s = next;
  }
}

TEST(Solver, StepLengthScalesWithAlpha) {
  for (Method method : {Method::ascpg, Method::scgd}) {
    LinearCompositionOracle o(noisy_linear(), 8);
    const std::uint64_t K = 40000;
    const RunTrace t = run(o, noisy_config(method, K));
    double early = 0.0, overall = 0.0;
    for (const auto& r : t.records) {
      const double ratio = r.step_len / noisy_config(method, K).schedule.alpha(r.k);
      ASSERT_TRUE(std::isfinite(ratio));
      overall = std::max(overall, ratio);
      if (r.k <= K / 4) early = std::max(early, ratio);
    }
    EXPECT_LE(overall, 2.0 * early) << to_string(method);
  }
}

TEST(Solver, SameSeedSameTraceAcrossWorkerCounts) {
  auto factory = [](std::uint64_t seed) { return LinearCompositionOracle(noisy_linear(), seed); };
  SolverConfig cfg = noisy_config(Method::ascpg, 2000);
  cfg.trace_stride = 7;
  const auto seeds = seed_range(100, 9);
  const auto serial = run_seeds(factory, cfg, seeds, 1);
  const auto parallel = run_seeds(factory, cfg, seeds, 4);
  const auto again = run_seeds(factory, cfg, seeds, 4);
  ASSERT_EQ(serial.size(), seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    EXPECT_EQ(serial[i].seed, seeds[i]);
    EXPECT_EQ(parallel[i].seed, seeds[i]);
    expect_same_trace(serial[i].trace, parallel[i].trace);
    expect_same_trace(serial[i].trace, again[i].trace);
  }
  LinearCompositionOracle solo(noisy_linear(), seeds[3]);
  SolverConfig local = cfg;
  local.seed = seeds[3];
  expect_same_trace(run(solo, local), serial[3].trace);
  EXPECT_NE(serial[0].trace.final_x, serial[1].trace.final_x);
}

TEST(Solver, DivergenceKeepsPartialTrace) {
  LinearCompositionOracle o(random_linear_problem(3, 4, {0.1, 0.1, 0.1}, 2, 3.0, 5.0), 0);
  SolverConfig cfg;
  cfg.schedule = Schedule{100.0, 0.5, 1.0, 1.0, true};
  cfg.max_iters = 1000;
  try {
    run(o, cfg);
    FAIL() << "expected divergence";
  } catch (const divergence_error& e) {
    EXPECT_GE(e.iteration(), 1u);
    const RunTrace& partial = e.partial_trace();
    EXPECT_EQ(partial.records.size(), e.iteration() - 1);
    for (const auto& r : partial.records) EXPECT_TRUE(std::isfinite(r.step_len));
  }
  auto factory = [](std::uint64_t seed) {
    return LinearCompositionOracle(random_linear_problem(3, 4, {0.1, 0.1, 0.1}, 2, 3.0, 5.0),
                                   seed);
  };
  const auto results = run_seeds(factory, cfg, {1, 2}, 2);
  for (const auto& r : results) {
    ASSERT_TRUE(r.divergence.has_value());
    EXPECT_NE(r.divergence->find("diverged at iteration"), std::string::npos);
  }
  EXPECT_TRUE(completed_traces(results).empty());
}

TEST(Solver, InvalidConfigurationRejected) {
  LinearCompositionOracle o(noisy_linear(), 0);
  SolverConfig cfg = noisy_config(Method::ascpg, 0);
  EXPECT_THROW(run(o, cfg), std::invalid_argument);
  cfg.max_iters = 10;
  cfg.trace_stride = 0;
  EXPECT_THROW(run(o, cfg), std::invalid_argument);
  cfg.trace_stride = 1;
  cfg.schedule.a = 1.5;
  EXPECT_THROW(run(o, cfg), std::invalid_argument);
  cfg.schedule.a = 1.0;
  cfg.x1 = Vector::Zero(4);
  EXPECT_THROW(run(o, cfg), std::invalid_argument);
  cfg.x1.reset();
  cfg.warm_start_y = false;
  cfg.y0 = Vector::Zero(3);
  EXPECT_THROW(run(o, cfg), std::invalid_argument);
  EXPECT_EQ(parse_method("ascpg"), Method::ascpg);
  EXPECT_EQ(parse_method("scgd"), Method::scgd);
  EXPECT_FALSE(parse_method("sgd"));
}

TEST(Solver, TrackingErrorDecaysOnRandomMdp) {
  const MdpSpec spec = build_random_mdp({20, 5, 3, 4, 0.9}, 12);
  auto factory = [&](std::uint64_t seed) { return BellmanOracle(spec, seed); };
  for (double b : {1.0, 0.8}) {
    SolverConfig cfg;
    cfg.schedule = Schedule{0.5, 1.0, 2.0, b, true};
    cfg.max_iters = 20000;
    cfg.trace_stride = 100;
    const auto results = run_seeds(factory, cfg, seed_range(1, 100), 4);
    const auto traces = completed_traces(results);
    ASSERT_EQ(traces.size(), 100u);
    const AggregateSeries s = aggregate(traces, Field::tracking_err_sq, Axis::iters);
    const SlopeFit fit = fit_slope(s, {s.ks.back() / 2.0, s.ks.back()});
    EXPECT_NEAR(fit.slope, -b, 0.3) << "b=" << b;
  }
}
