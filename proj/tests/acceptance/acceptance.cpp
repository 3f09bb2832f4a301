// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include "ascpg/ascpg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace ascpg;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::string fit_text(const SlopeFit& f) {
  return "slope " + num(f.slope) + " r2 " + num(f.r2) + " over [" + num(f.k_lo, 6) + ", " +
         num(f.k_hi, 6) + "]";
}

template <class Factory>
AggregateSeries run_and_aggregate(Factory factory, const SolverConfig& cfg, std::size_t seeds,
                                  Field field, std::size_t* diverged = nullptr) {
  const auto results = run_seeds(factory, cfg, seed_range(1, seeds));
  const auto traces = completed_traces(results);
  if (diverged) *diverged = results.size() - traces.size();
  if (traces.size() != results.size()) {
    throw std::runtime_error(std::to_string(results.size() - traces.size()) + " runs diverged");
  }
  return aggregate(traces, field, Axis::iters);
}

// Strongly convex objective with an affine inner map: consistent random MDP.
Outcome criterion_linear_rate() {
  const MdpSpec spec = build_consistent_mdp({20, 8, 3, 4, 0.9}, 0, 42);
  auto factory = [&spec](std::uint64_t s) { return BellmanOracle(spec, s); };
  SolverConfig cfg;
  cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_linear, 1.0, 2.0);
  cfg.max_iters = 100000;
  cfg.trace_stride = 100;
  const SlopeFit fit = fit_slope(run_and_aggregate(factory, cfg, 50, Field::dist_sq));
  return {fit.slope >= -1.3 && fit.slope <= -0.7 && fit.r2 >= 0.95,
          "dist_sq " + fit_text(fit) + "; need slope in [-1.3, -0.7], r2 >= 0.95"};
}

// Strongly convex objective with a nonlinear inner map: mean-variance risk.
Outcome criterion_general_rate() {
  const MeanVarianceData data = make_mean_variance_data(5, 50, 3);
  auto factory = [&data](std::uint64_t s) { return MeanVarianceOracle(data, 0.1, s); };
  SolverConfig cfg;
  cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_general, 1.0, 4.0);
  cfg.regularizer = Regularizer::box(Vector::Constant(5, -1.0), Vector::Constant(5, 1.0));
  cfg.max_iters = 100000;
  cfg.trace_stride = 100;
  const SlopeFit fit = fit_slope(run_and_aggregate(factory, cfg, 50, Field::dist_sq));
  return {fit.slope >= -1.1 && fit.slope <= -0.5,
          "dist_sq " + fit_text(fit) + "; need slope in [-1.1, -0.5]"};
}

// ||y_k - g(x_k)||^2 decays like k^-b on the linear-inner family.
Outcome criterion_tracking() {
  const LinearProblem prob = random_linear_problem(5, 8, {0.1, 0.1, 0.1}, 7);
  auto factory = [&prob](std::uint64_t s) { return LinearCompositionOracle(prob, s); };
  Outcome out{true, {}};
  for (double b : {1.0, 0.8}) {
    SolverConfig cfg;
    cfg.schedule = Schedule{1.0, 1.0, 2.0, b};
    cfg.max_iters = 20000;
    cfg.trace_stride = 100;
    const SlopeFit fit = fit_slope(run_and_aggregate(factory, cfg, 100, Field::tracking_err_sq));
    const bool ok = std::abs(fit.slope + b) <= 0.3;
    out.pass = out.pass && ok;
    if (!out.detail.empty()) out.detail += "; ";
    out.detail += "b=" + num(b) + ": " + fit_text(fit) + (ok ? "" : " (outside -b +- 0.3)");
  }
  return out;
}

// Terminal squared distance of a run, measured at its final iterate.
template <class Factory>
double terminal_mean_dist_sq(Factory factory, const SolverConfig& cfg,
                             const std::vector<std::uint64_t>& seeds, std::uint64_t* queries) {
  double sum = 0.0;
  for (const auto& r : run_seeds(factory, cfg, seeds)) {
    if (r.divergence) return INFINITY;
    const auto oracle = factory(r.seed);
    sum += (r.trace.final_x - oracle.project_solution(r.trace.final_x)).squaredNorm();
    if (queries) *queries = r.trace.oracle_queries;
  }
  return sum / double(seeds.size());
}

// ASC-PG against SCGD on a random MDP, each with constants tuned by a sweep
// on separate seeds, at the same oracle budget.
Outcome criterion_vs_scgd() {
  const MdpSpec spec = build_random_mdp({100, 20, 3, 4, 0.9}, 2024);
  auto factory = [&spec](std::uint64_t s) { return BellmanOracle(spec, s); };
  const std::uint64_t K = 20000;
  const auto tuning = seed_range(1001, 5);
  const auto evaluation = seed_range(1, 50);

  std::string detail;
  double final[2] = {0.0, 0.0};
  std::uint64_t queries[2] = {0, 0};
  const Method methods[2] = {Method::ascpg, Method::scgd};
  for (int i = 0; i < 2; ++i) {
    SolverConfig cfg;
    cfg.method = methods[i];
    cfg.max_iters = K;
    cfg.trace_stride = K;
    double best = INFINITY, best_ca = 0.0, best_cb = 0.0;
    for (double ca : {0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0}) {
      for (double cb : {1.0, 2.0, 4.0}) {
        cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_linear, ca, cb);
        const double v = terminal_mean_dist_sq(factory, cfg, tuning, nullptr);
        if (v < best) {
          best = v;
          best_ca = ca;
          best_cb = cb;
        }
      }
    }
    cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_linear, best_ca, best_cb);
    final[i] = terminal_mean_dist_sq(factory, cfg, evaluation, &queries[i]);
    if (i) detail += "; ";
    detail += std::string(to_string(methods[i])) + " (c_a " + num(best_ca) + ", c_b " +
              num(best_cb) + ") " + num(final[i]);
  }
  const bool matched = queries[0] == queries[1];
  detail += " at " + std::to_string(queries[0]) + " queries";
  if (!matched) detail += " (budgets differ: " + std::to_string(queries[1]) + ")";
  return {matched && final[0] <= final[1], "terminal mean dist_sq " + detail};
}

// l1-regularized Bellman residual with a planted 4-sparse solution in d=100.
Outcome criterion_sparse_support() {
  const std::vector<double> lambdas{0.1, 0.03, 0.01};
  const int seeds = 50;
  int recovered = 0;
  std::vector<int> by_lambda(lambdas.size(), 0);
  for (int s = 1; s <= seeds; ++s) {
    const MdpSpec spec = build_consistent_mdp({100, 100, 3, 4, 0.9}, 4, 1000 + s);
    for (std::size_t l = 0; l < lambdas.size(); ++l) {
      BellmanOracle oracle(spec, s);
      SolverConfig cfg;
      cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_linear, 1.0, 2.0);
      cfg.regularizer = Regularizer::l1(lambdas[l]);
      cfg.max_iters = 100000;
      cfg.trace_stride = cfg.max_iters;
      cfg.seed = s;
      const Vector x = run(oracle, cfg).final_x;
      std::vector<Index> order(x.size());
      for (Index i = 0; i < x.size(); ++i) order[i] = i;
      std::partial_sort(order.begin(), order.begin() + 4, order.end(),
                        [&x](Index a, Index b) { return std::abs(x[a]) > std::abs(x[b]); });
      std::sort(order.begin(), order.begin() + 4);
      if (order[0] == 0 && order[1] == 1 && order[2] == 2 && order[3] == 3) {
        ++recovered;
        ++by_lambda[l];
        break;  // one lambda is enough for this seed
      }
    }
  }
  std::string detail = std::to_string(recovered) + "/" + std::to_string(seeds) +
                       " seeds recover the support (first success at lambda";
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    detail += " " + num(lambdas[l]) + ":" + std::to_string(by_lambda[l]);
  }
  return {recovered >= 45, detail + "); need >= 45"};
}

// ---------------------------------------------------------------------------
// Property suite

Vector normal_vector(Rng& rng, Index n, double scale) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

// Distance of (u - p) from step * (subdifferential of the penalty at p).
double prox_residual_l1(const Vector& u, const Vector& p, double step, double lambda) {
  double worst = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double r = u[i] - p[i];
    const double t = step * lambda;
    const double e = p[i] != 0.0 ? std::abs(r - std::copysign(t, p[i]))
                                 : std::max(0.0, std::abs(r) - t);
    worst = std::max(worst, e);
  }
  return worst;
}

double prox_residual_box(const Vector& u, const Vector& p, const Vector& lo, const Vector& hi) {
  double worst = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double r = u[i] - p[i];
    double e = std::max({0.0, lo[i] - p[i], p[i] - hi[i]});  // feasibility
    if (p[i] > lo[i] && p[i] < hi[i]) e = std::max(e, std::abs(r));
    if (p[i] == lo[i] && p[i] < hi[i]) e = std::max(e, std::max(0.0, r));
    if (p[i] == hi[i] && p[i] > lo[i]) e = std::max(e, std::max(0.0, -r));
    worst = std::max(worst, e);
  }
  return worst;
}

struct Property {
  std::string name;
  bool pass;
  std::string detail;
};

Property prop_prox() {
  Rng rng(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Index n = 1 + rng.index(20);
    const Vector u = normal_vector(rng, n, 3.0);
    const double step = rng.uniform(0.01, 2.0);
    const double lambda = rng.uniform(0.0, 2.0);
    worst = std::max(worst, prox_residual_l1(u, Regularizer::l1(lambda).prox(step, u), step, lambda));
    Vector lo = normal_vector(rng, n, 1.0), hi = lo;
    for (Index j = 0; j < n; ++j) hi[j] += rng.uniform(0.0, 2.0);
    worst = std::max(worst, prox_residual_box(u, Regularizer::box(lo, hi).prox(step, u), lo, hi));
  }
  return {"prox optimality residual", worst <= 1e-12, "max " + num(worst)};
}

const LinearProblem& noisy_linear() {
  static const LinearProblem p = random_linear_problem(5, 8, {0.1, 0.1, 0.1}, 7);
  return p;
}

SolverConfig noisy_config(Method method, std::uint64_t iters) {
  SolverConfig cfg;
  cfg.method = method;
  cfg.schedule = Schedule::from_regime(Regime::stronglyconvex_general, 1.0, 2.0);
  cfg.max_iters = iters;
  return cfg;
}

Property prop_extrapolation() {
  LinearCompositionOracle o(noisy_linear(), 2);
  const SolverConfig cfg = noisy_config(Method::ascpg, 0);
  SolverState s = initial_state(o, cfg);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double b = cfg.schedule.beta(s.k);
    const SolverState next = ascpg_step(s, o, cfg);
    worst = std::max(worst, (next.x - (b * next.z + (1.0 - b) * s.x)).cwiseAbs().maxCoeff());
    s = next;
  }
  return {"z-step identity", worst <= 1e-10, "max " + num(worst)};
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

Property prop_weighted_history() {
  double worst = 0.0;
  for (Method method : {Method::ascpg, Method::scgd}) {
    for (std::uint64_t K : {1u, 17u, 500u}) {
      RecordingOracle<LinearCompositionOracle> o{LinearCompositionOracle(noisy_linear(), 4), {}};
      const SolverConfig cfg = noisy_config(method, K);
      SolverState s = initial_state(o, cfg);
      for (std::uint64_t k = 0; k < K; ++k) s = detail::step(s, o, cfg, method == Method::ascpg);
      const auto xi = weights(cfg.schedule, K - 1);
      Vector replay = Vector::Zero(o.outer_dim());
      for (std::uint64_t t = 0; t < K; ++t) replay += xi[t] * o.values[t + 1];
      worst = std::max(worst, (s.y - replay).cwiseAbs().maxCoeff());
    }
  }
  return {"weighted-history identity", worst <= 1e-8, "max " + num(worst)};
}

Property prop_finite_differences() {
  VerifyOptions opt;
  opt.fd_rel_tol = 1e-4;
  bool pass = true;
  std::string detail;
  for (Family f : {Family::identity, Family::linear, Family::random_mdp, Family::consistent_mdp,
                   Family::baird, Family::meanvariance, Family::nonconvex}) {
    const CheckResult r = with_problem(default_problem(f), [&](auto factory) {
      return check_gradient_fd(factory(1), opt);
    });
    pass = pass && r.pass;
    detail += (detail.empty() ? "" : ", ") + std::string(to_string(f)) + " " +
              r.detail.substr(r.detail.rfind(' ') + 1);
  }
  return {"finite-difference gradients", pass, detail};
}

// Every quantity is a small dyadic rational, so the identity holds exactly.
Property prop_affine_bellman() {
  MdpSpec spec;
  spec.S = 3;
  spec.gamma = 0.5;
  spec.P.resize(3, 3);
  spec.P << 0.5, 0.25, 0.25, 0.0, 0.5, 0.5, 1.0, 0.0, 0.0;
  spec.R.resize(3, 3);
  spec.R << 1.0, 2.0, 0.0, 0.0, -1.0, 3.0, 0.5, 0.0, 0.0;
  spec.Phi.resize(3, 2);
  spec.Phi << 1.0, 0.0, 2.0, 1.0, -1.0, 4.0;
  const BellmanOracle o(spec, 0);
  const Vector w1 = Eigen::Vector2d(1.0, -2.0), w2 = Eigen::Vector2d(0.5, 3.0);
  const Vector g0 = o.inner_value(Vector::Zero(2));
  const bool exact = o.inner_value(w1 + w2) - g0 == (o.inner_value(w1) - g0) + (o.inner_value(w2) - g0) &&
                     o.inner_jacobian(w1) == o.inner_jacobian(w2);
  const CheckResult random = check_inner_affine(BellmanOracle(build_random_mdp({}, 2024), 0),
                                                VerifyOptions{});
  return {"Bellman inner map affine", exact && random.pass,
          std::string(exact ? "exact" : "not exact") + " on dyadic chain, random MDP " +
              random.detail};
}

Property prop_step_ratio() {
  bool pass = true;
  std::string detail;
  for (Method method : {Method::ascpg, Method::scgd}) {
    LinearCompositionOracle o(noisy_linear(), 8);
    const std::uint64_t K = 40000;
    const SolverConfig cfg = noisy_config(method, K);
    const RunTrace t = run(o, cfg);
    double early = 0.0, overall = 0.0;
    for (const auto& r : t.records) {
      const double ratio = r.step_len / cfg.schedule.alpha(r.k);
      if (!std::isfinite(ratio)) pass = false;
      overall = std::max(overall, ratio);
      if (r.k <= K / 4) early = std::max(early, ratio);
    }
    pass = pass && overall <= 2.0 * early;
    detail += (detail.empty() ? "" : ", ") + std::string(to_string(method)) + " max " +
              num(overall) + " (first quarter " + num(early) + ")";
  }
  return {"step length / alpha bounded", pass, detail};
}

Property prop_slope_fitter() {
  double worst = 0.0;
  for (double p : {4.0 / 9.0, 0.5, 0.8, 1.0}) {
    std::vector<double> ks, vs;
    for (int i = 0; i <= 50; ++i) {
      ks.push_back(std::pow(10.0, i / 10.0));
      vs.push_back(3.0 * std::pow(ks.back(), -p));
    }
    worst = std::max(worst, std::abs(fit_slope(ks, vs, 1.0, 1e5).slope + p));
  }
  return {"slope fitter exponents", worst <= 1e-6, "max error " + num(worst)};
}

bool same_trace(const RunTrace& a, const RunTrace& b) {
  if (a.records.size() != b.records.size() || a.final_x.size() != b.final_x.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto& ra = a.records[i];
    const auto& rb = b.records[i];
    if (ra.k != rb.k || ra.queries != rb.queries || ra.dist != rb.dist ||
        ra.grad_norm_sq != rb.grad_norm_sq || ra.tracking_err_sq != rb.tracking_err_sq ||
        ra.step_len != rb.step_len || ra.objective != rb.objective) {
      return false;
    }
  }
  return std::memcmp(a.final_x.data(), b.final_x.data(),
                     sizeof(double) * static_cast<std::size_t>(a.final_x.size())) == 0;
}

Property prop_reproducible() {
  const MdpSpec spec = build_random_mdp({40, 6, 3, 4, 0.9}, 9);
  auto factory = [&spec](std::uint64_t s) { return BellmanOracle(spec, s); };
  SolverConfig cfg = noisy_config(Method::ascpg, 5000);
  cfg.trace_stride = 13;
  const auto seeds = seed_range(50, 8);
  const auto serial = run_seeds(factory, cfg, seeds, 1);
  const auto parallel = run_seeds(factory, cfg, seeds, 4);
  bool pass = true;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    pass = pass && serial[i].seed == seeds[i] && same_trace(serial[i].trace, parallel[i].trace);
  }
  auto solo = factory(seeds[5]);
  SolverConfig local = cfg;
  local.seed = seeds[5];
  pass = pass && same_trace(run(solo, local), serial[5].trace);
  pass = pass && !same_trace(serial[0].trace, serial[1].trace);
  return {"bit-exact reproducibility", pass, "8 seeds, 1 vs 4 workers and a solo rerun"};
}

Property prop_nonconvex() {
  const NonconvexProblem prob = random_nonconvex_problem(4, 3, 5);
  auto factory = [&prob](std::uint64_t s) { return NonconvexOracle(prob, s); };
  SolverConfig cfg;
  cfg.schedule = Schedule::from_regime(Regime::nonconvex_general, 1.0, 2.0);
  cfg.max_iters = 20000;
  const AggregateSeries agg = run_and_aggregate(factory, cfg, 20, Field::grad_norm_sq_avg);
  // Decreasing along a log-spaced grid of iterations.
  bool decreasing = true;
  double prev = INFINITY;
  for (int i = 0; i <= 20; ++i) {
    const auto k = static_cast<std::size_t>(std::lround(std::pow(10.0, 1.0 + 3.0 * i / 20.0)));
    const double v = agg.mean[std::min(k, agg.mean.size()) - 1];
    decreasing = decreasing && v < prev;
    prev = v;
  }
  const SlopeFit fit = fit_slope(agg);
  return {"nonconvex averaged gradient norm", decreasing && fit.slope <= -0.2,
          std::string(decreasing ? "decreasing" : "not decreasing") + ", " + fit_text(fit) +
              "; need slope <= -0.2"};
}

Outcome criterion_properties() {
  const std::vector<std::function<Property()>> suite{
      prop_nonconvex,        prop_prox,          prop_extrapolation, prop_weighted_history,
      prop_finite_differences, prop_affine_bellman, prop_step_ratio,  prop_slope_fitter,
      prop_reproducible};
  Outcome out{true, {}};
  int passed = 0;
  for (const auto& check : suite) {
    const Property p = check();
    std::printf("    %s: %s (%s)\n", p.name.c_str(), p.pass ? "PASS" : "FAIL", p.detail.c_str());
    out.pass = out.pass && p.pass;
    passed += p.pass;
  }
  out.detail = std::to_string(passed) + "/" + std::to_string(suite.size()) + " properties hold";
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Outcome (*check)();
  };
  const Criterion criteria[] = {
      {"strongly convex, linear inner: k^-1 rate", criterion_linear_rate},
      {"strongly convex, general inner: rate", criterion_general_rate},
      {"tracking error decays like k^-b", criterion_tracking},
      {"ASC-PG terminal error <= SCGD", criterion_vs_scgd},
      {"l1 recovers planted support", criterion_sparse_support},
      {"property suites", criterion_properties},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%d] %s: %s (%s) [%.1fs]\n", index, c.name, o.pass ? "PASS" : "FAIL",
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
