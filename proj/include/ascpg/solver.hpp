#pragma once

#include "ascpg/oracle.hpp"
#include "ascpg/prox.hpp"
#include "ascpg/schedule.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ascpg {

enum class Method { ascpg, scgd };

inline constexpr std::string_view to_string(Method m) {
  return m == Method::ascpg ? "ascpg" : "scgd";
}

inline std::optional<Method> parse_method(std::string_view name) {
  if (name == "ascpg") return Method::ascpg;
  if (name == "scgd") return Method::scgd;
  return std::nullopt;
}

/// Iterates (x_k, y_k, z_k) at the start of iteration k.
struct SolverState {
  Vector x;  // n
  Vector y;  // m, running estimate of g(x_k)
  Vector z;  // n, last extrapolated query point
  std::uint64_t k = 1;
  std::uint64_t oracle_queries = 0;
};

struct SolverConfig {
  Method method = Method::ascpg;
  Schedule schedule;
  Regularizer regularizer;
  std::uint64_t max_iters = 1000;
  std::uint64_t seed = 0;
  std::uint64_t trace_stride = 1;
  bool warm_start_y = true;
  std::optional<Vector> x1;  // default: zero
  std::optional<Vector> y0;  // used as y_1 when warm_start_y is false; default zero
  // Distance is measured to this point instead of the oracle's solution set
  // when set (long-run reference solutions).
  std::optional<Vector> reference;

  void validate() const {
    schedule.validate();
    if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
    if (trace_stride < 1) throw std::invalid_argument("solver: trace_stride must be >= 1");
  }
};

/// Iterates whose magnitude exceeds this are treated as divergence.
inline constexpr double kDivergenceBound = 1e12;

/// Per-record diagnostics, all evaluated at x_k (before iteration k runs)
/// except `step_len`, which is ||x_{k+1} - x_k||.
struct TraceRecord {
  std::uint64_t k = 0;
  std::uint64_t queries = 0;  // cumulative oracle queries after iteration k
  std::optional<double> dist;             // ||x_k - P_X*(x_k)||
  std::optional<double> grad_norm_sq;     // ||grad F(x_k)||^2
  std::optional<double> tracking_err_sq;  // ||y_k - g(x_k)||^2
  double step_len = 0.0;
  std::optional<double> objective;        // F(x_k) + R(x_k)
};

struct RunTrace {
  std::vector<TraceRecord> records;
  Vector final_x;
  std::uint64_t iterations = 0;
  std::uint64_t oracle_queries = 0;
};

class divergence_error : public std::runtime_error {
public:
  divergence_error(std::uint64_t k, const std::string& what)
      : std::runtime_error("diverged at iteration " + std::to_string(k) + ": " + what),
        k_(k) {}

  std::uint64_t iteration() const { return k_; }
  const RunTrace& partial_trace() const { return partial_; }
  void attach(RunTrace partial) { partial_ = std::move(partial); }

private:
  std::uint64_t k_;
  RunTrace partial_;
};

namespace detail {

inline void check_iterate(const Vector& v, std::uint64_t k, const char* name) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]) || std::abs(v[i]) > kDivergenceBound) {
      throw divergence_error(k, std::string(name) + " left the finite range");
    }
  }
}

template <CompositionOracle O>
SolverState step(const SolverState& s, O& oracle, const SolverConfig& cfg,
                 bool extrapolate) {
  const std::uint64_t k = s.k;
  const double a_k = cfg.schedule.alpha(k);
  const double b_k = cfg.schedule.beta(k);

  const InnerSample at_x = oracle.sample_inner(s.x, InnerParts::jacobian);
  const OuterGradSample at_y = oracle.sample_outer(s.y);
  const Vector direction = at_x.jacobian.transpose() * at_y.grad;

  SolverState next;
  next.k = k + 1;
  next.x = cfg.regularizer.prox(a_k, s.x - a_k * direction);
  if (extrapolate) {
    // (1 - 1/b) x_k + (1/b) x_{k+1}, written to avoid cancellation for small b
    next.z = s.x + (next.x - s.x) / b_k;
  } else {
    next.z = next.x;
  }
  const InnerSample at_z = oracle.sample_inner(next.z, InnerParts::value);
  next.y = (1.0 - b_k) * s.y + b_k * at_z.value;
  next.oracle_queries = s.oracle_queries + 3;

  check_iterate(next.x, k, "x");
  check_iterate(next.z, k, "z");
  check_iterate(next.y, k, "y");
  return next;
}

}  // namespace detail

/// One iteration of the accelerated method: prox step on x, then
/// extrapolation z_{k+1} = (1 - 1/beta_k) x_k + (1/beta_k) x_{k+1} and
/// smoothing y_{k+1} = (1 - beta_k) y_k + beta_k g_w(z_{k+1}).
template <CompositionOracle O>
SolverState ascpg_step(const SolverState& s, O& oracle, const SolverConfig& cfg) {
  return detail::step(s, oracle, cfg, true);
}

/// Baseline two-timescale step: as ascpg_step but y tracks g at x_{k+1}
/// directly (no extrapolation).
template <CompositionOracle O>
SolverState scgd_step(const SolverState& s, O& oracle, const SolverConfig& cfg) {
  return detail::step(s, oracle, cfg, false);
}

/// Initial state: x_1 from config (zero by default); y_1 = g_w(x_1) from one
/// oracle draw when warm-starting, otherwise the supplied y_0.
template <CompositionOracle O>
SolverState initial_state(O& oracle, const SolverConfig& cfg) {
  const Index n = oracle.inner_dim();
  const Index m = oracle.outer_dim();
  SolverState s;
  s.x = cfg.x1 ? *cfg.x1 : Vector::Zero(n);
  require_dim(s.x, n, "initial x");
  s.z = s.x;
  if (cfg.warm_start_y) {
    s.y = oracle.sample_inner(s.x, InnerParts::value).value;
    s.oracle_queries = 1;
  } else {
    s.y = cfg.y0 ? *cfg.y0 : Vector::Zero(m);
  }
  require_dim(s.y, m, "initial y");
  s.k = 1;
  return s;
}

template <CompositionOracle O>
TraceRecord make_record(const SolverState& s, const O& oracle, const SolverConfig& cfg) {
  TraceRecord rec;
  rec.k = s.k;
  if (cfg.reference) {
    rec.dist = (s.x - *cfg.reference).norm();
  } else if constexpr (HasSolutionSet<O>) {
    rec.dist = (s.x - oracle.project_solution(s.x)).norm();
  }
  if constexpr (HasTruth<O>) {
    const Vector g = oracle.inner_value(s.x);
    const Vector grad = oracle.inner_jacobian(s.x).transpose() * oracle.outer_gradient(g);
    rec.grad_norm_sq = grad.squaredNorm();
    rec.tracking_err_sq = (s.y - g).squaredNorm();
    rec.objective = oracle.outer_value(g) + cfg.regularizer.value(s.x);
  }
  return rec;
}

/// Run max_iters iterations of the configured method and collect every
/// trace_stride-th record (k = 1, 1 + stride, ...).
template <CompositionOracle O>
RunTrace run(O& oracle, const SolverConfig& cfg) {
  cfg.validate();
  RunTrace trace;
  SolverState s = initial_state(oracle, cfg);
  const bool extrapolate = cfg.method == Method::ascpg;
  try {
    for (std::uint64_t it = 0; it < cfg.max_iters; ++it) {
      const bool record = (s.k - 1) % cfg.trace_stride == 0;
      std::optional<TraceRecord> rec;
      if (record) rec = make_record(s, oracle, cfg);
      SolverState next = detail::step(s, oracle, cfg, extrapolate);
      if (rec) {
        rec->step_len = (next.x - s.x).norm();
        rec->queries = next.oracle_queries;
        trace.records.push_back(*rec);
      }
      s = std::move(next);
    }
  } catch (divergence_error& e) {
    trace.final_x = s.x;
    trace.iterations = s.k - 1;
    trace.oracle_queries = s.oracle_queries;
    e.attach(std::move(trace));
    throw;
  }
  trace.final_x = s.x;
  trace.iterations = s.k - 1;
  trace.oracle_queries = s.oracle_queries;
  return trace;
}

}  // namespace ascpg
