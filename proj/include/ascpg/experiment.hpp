#pragma once

// Experiment descriptions for the command-line tool: problem family,
// solver settings, regularizer and run options, read from a config file.

#include "ascpg/config.hpp"
#include "ascpg/harness.hpp"
#include "ascpg/metrics.hpp"
#include "ascpg/problems/bellman.hpp"
#include "ascpg/problems/linear.hpp"
#include "ascpg/problems/mdp.hpp"
#include "ascpg/problems/mean_variance.hpp"
#include "ascpg/problems/nonconvex.hpp"
#include "ascpg/solver.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ascpg {

enum class Family {
  identity,
  linear,
  random_mdp,
  consistent_mdp,
  baird,
  mdp_file,
  meanvariance,
  nonconvex,
};

inline constexpr std::string_view to_string(Family f) {
  switch (f) {
    case Family::identity: return "identity";
    case Family::linear: return "linear";
    case Family::random_mdp: return "random_mdp";
    case Family::consistent_mdp: return "consistent_mdp";
    case Family::baird: return "baird";
    case Family::mdp_file: return "mdp_file";
    case Family::meanvariance: return "meanvariance";
    case Family::nonconvex: return "nonconvex";
  }
  return "?";
}

/// Accepts the canonical names plus "bellman" for random_mdp.
inline std::optional<Family> parse_family(std::string_view name) {
  if (name == "bellman") return Family::random_mdp;
  for (Family f : {Family::identity, Family::linear, Family::random_mdp, Family::consistent_mdp,
                   Family::baird, Family::mdp_file, Family::meanvariance, Family::nonconvex}) {
    if (to_string(f) == name) return f;
  }
  return std::nullopt;
}

inline bool is_mdp_family(Family f) {
  return f == Family::random_mdp || f == Family::consistent_mdp || f == Family::baird ||
         f == Family::mdp_file;
}

struct ProblemConfig {
  Family family = Family::identity;
  Index dim = 2;
  Index rows = 8;
  double noise = 0.0;  // identity / nonconvex
  LinearNoise linear_noise{0.1, 0.1, 0.1};
  double sv_min = 1.0;
  double sv_max = 2.0;
  RandomMdpParams mdp;
  Index support = 0;
  double residual = 0.0;
  bool exact = false;
  std::string fixture;
  Index samples = 50;
  double lambda = 0.1;
  double data_noise = 0.5;
  std::uint64_t instance_seed = 0;
};

/// Family defaults, applied before the [problem] keys are read.
inline ProblemConfig default_problem(Family f) {
  ProblemConfig p;
  p.family = f;
  switch (f) {
    case Family::identity: p.dim = 2; p.noise = 0.0; break;
    case Family::linear: p.dim = 5; p.rows = 8; p.instance_seed = 7; break;
    case Family::random_mdp: p.mdp = RandomMdpParams{}; p.instance_seed = 2024; break;
    case Family::consistent_mdp:
      p.mdp = RandomMdpParams{20, 8, 3, 4, 0.9};
      p.instance_seed = 42;
      break;
    case Family::baird: break;
    case Family::mdp_file: break;
    case Family::meanvariance: p.dim = 5; p.samples = 50; p.lambda = 0.1; p.instance_seed = 3; break;
    case Family::nonconvex: p.dim = 4; p.rows = 3; p.noise = 0.1; p.instance_seed = 5; break;
  }
  return p;
}

struct RegularizerConfig {
  std::string kind = "zero";  // zero | l1 | box
  double lambda = 0.0;
  std::vector<double> lo{-1.0};
  std::vector<double> hi{1.0};
};

struct ExperimentConfig {
  std::string source;  // path the config was read from, if any
  ProblemConfig problem;

  std::vector<Method> methods{Method::ascpg};
  std::optional<Regime> regime;
  Schedule schedule;
  std::uint64_t iters = 1000;
  std::uint64_t trace_stride = 1;
  bool warm_start_y = true;
  std::vector<double> x1;  // empty: zero; one value: filled
  std::vector<double> y0;
  std::uint64_t reference_iters = 0;  // > 0: distance to a long-run reference
  std::uint64_t reference_seed = 0;

  RegularizerConfig regularizer;

  std::vector<std::uint64_t> seeds{1};
  bool explicit_seed_list = false;
  unsigned workers = 1;
  std::string out;
  std::optional<Field> field;  // unset: dist_sq when a distance is available
  Axis axis = Axis::queries;
};

namespace detail {

inline Vector expand(const std::vector<double>& v, Index n) {
  if (v.size() == 1) return Vector::Constant(n, v[0]);
  return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace detail

inline Regularizer build_regularizer(const RegularizerConfig& r, Index n) {
  if (r.kind == "zero") return Regularizer::zero();
  if (r.kind == "l1") return Regularizer::l1(r.lambda);
  if (r.kind == "box") return Regularizer::box(detail::expand(r.lo, n), detail::expand(r.hi, n));
  throw std::invalid_argument("unknown regularizer kind '" + r.kind + "'");
}

inline MdpSpec build_mdp(const ProblemConfig& p) {
  switch (p.family) {
    case Family::random_mdp: return build_random_mdp(p.mdp, p.instance_seed);
    case Family::consistent_mdp:
      return build_consistent_mdp(p.mdp, p.support, p.instance_seed, p.residual);
    case Family::baird: return build_baird(p.instance_seed);
    case Family::mdp_file: return load_mdp(p.fixture);
    default: throw std::invalid_argument("not an mdp family");
  }
}

/// Calls visit(factory) where factory(seed) returns a fresh oracle for the
/// configured problem. Instance data is built once and shared by value.
template <class Visitor>
decltype(auto) with_problem(const ProblemConfig& p, Visitor&& visit) {
  switch (p.family) {
    case Family::identity: {
      const LinearProblem prob = identity_problem(p.dim, p.noise);
      return visit([prob](std::uint64_t s) { return LinearCompositionOracle(prob, s); });
    }
    case Family::linear: {
      const LinearProblem prob = random_linear_problem(p.dim, p.rows, p.linear_noise,
                                                       p.instance_seed, p.sv_min, p.sv_max);
      return visit([prob](std::uint64_t s) { return LinearCompositionOracle(prob, s); });
    }
    case Family::random_mdp:
    case Family::consistent_mdp:
    case Family::baird:
    case Family::mdp_file: {
      const MdpSpec spec = build_mdp(p);
      const bool exact = p.exact;
      return visit([spec, exact](std::uint64_t s) { return BellmanOracle(spec, s, exact); });
    }
    case Family::meanvariance: {
      const MeanVarianceData data =
          make_mean_variance_data(p.dim, p.samples, p.instance_seed, p.data_noise);
      const double lambda = p.lambda;
      return visit([data, lambda](std::uint64_t s) { return MeanVarianceOracle(data, lambda, s); });
    }
    case Family::nonconvex: {
      const NonconvexProblem prob = random_nonconvex_problem(p.dim, p.rows, p.instance_seed, p.noise);
      return visit([prob](std::uint64_t s) { return NonconvexOracle(prob, s); });
    }
  }
  throw std::invalid_argument("unknown family");
}

/// Solver settings for one method; the seed is filled in per run.
inline SolverConfig solver_config(const ExperimentConfig& e, Method m, Index n, Index mdim) {
  SolverConfig c;
  c.method = m;
  c.schedule = e.schedule;
  c.regularizer = build_regularizer(e.regularizer, n);
  c.max_iters = e.iters;
  c.trace_stride = e.trace_stride;
  c.warm_start_y = e.warm_start_y;
  if (!e.x1.empty()) c.x1 = detail::expand(e.x1, n);
  if (!e.y0.empty()) c.y0 = detail::expand(e.y0, mdim);
  return c;
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

template <class T>
void read_positive(const config::Section& s, const std::string& key, T& out) {
  if (auto v = s.get_int(key)) {
    if (*v < 1) s.invalid(key, "must be >= 1");
    out = static_cast<T>(*v);
  }
}

inline void read_seed(const config::Section& s, const std::string& key, std::uint64_t& out) {
  if (auto v = s.get_int(key)) {
    if (*v < 0) s.invalid(key, "must be >= 0");
    out = static_cast<std::uint64_t>(*v);
  }
}

inline void read_nonneg(const config::Section& s, const std::string& key, double& out) {
  if (auto v = s.get_double(key)) {
    if (!(*v >= 0.0) || !std::isfinite(*v)) s.invalid(key, "must be a finite value >= 0");
    out = *v;
  }
}

inline void check_vector_size(const config::Section& s, const std::string& key,
                              const std::vector<double>& v, Index n) {
  if (v.size() != 1 && static_cast<Index>(v.size()) != n) {
    s.invalid(key, "expected 1 or " + std::to_string(n) + " values, got " +
                       std::to_string(v.size()));
  }
  for (double x : v) {
    if (!std::isfinite(x)) s.invalid(key, "values must be finite");
  }
}

inline ProblemConfig parse_problem(const config::Section& s, const std::string& base_dir) {
  const auto name = s.get_string("family");
  if (!name) {
    throw config::config_error(s.source(), s.line(), "[problem] family is required");
  }
  const auto fam = parse_family(*name);
  if (!fam) s.invalid("family", "unknown family '" + *name + "'");
  ProblemConfig p = default_problem(*fam);
  switch (*fam) {
    case Family::identity:
      read_positive(s, "dim", p.dim);
      read_nonneg(s, "noise", p.noise);
      break;
    case Family::linear:
      read_positive(s, "dim", p.dim);
      read_positive(s, "rows", p.rows);
      read_nonneg(s, "noise_matrix", p.linear_noise.inner_matrix);
      read_nonneg(s, "noise_offset", p.linear_noise.inner_offset);
      read_nonneg(s, "noise_outer", p.linear_noise.outer);
      read_nonneg(s, "sv_min", p.sv_min);
      read_nonneg(s, "sv_max", p.sv_max);
      read_seed(s, "instance_seed", p.instance_seed);
      if (p.rows < p.dim) s.invalid("rows", "must be >= dim");
      if (!(p.sv_min > 0.0 && p.sv_min <= p.sv_max)) {
        s.invalid("sv_min", "need 0 < sv_min <= sv_max");
      }
      break;
    case Family::random_mdp:
    case Family::consistent_mdp:
      read_positive(s, "states", p.mdp.states);
      read_positive(s, "features", p.mdp.features);
      read_positive(s, "actions", p.mdp.actions);
      read_positive(s, "next_states", p.mdp.next_states);
      if (auto g = s.get_double("gamma")) {
        if (!(*g > 0.0 && *g < 1.0)) s.invalid("gamma", "must lie in (0, 1)");
        p.mdp.gamma = *g;
      }
      read_seed(s, "instance_seed", p.instance_seed);
      if (auto e = s.get_bool("exact")) p.exact = *e;
      if (p.mdp.states < 2) s.invalid("states", "must be >= 2");
      if (p.mdp.next_states > p.mdp.states) s.invalid("next_states", "must be <= states");
      if (*fam == Family::consistent_mdp) {
        if (auto v = s.get_int("support")) {
          if (*v < 0) s.invalid("support", "must be >= 0");
          p.support = *v;
        }
        if (auto v = s.get_double("residual")) {
          if (!std::isfinite(*v)) s.invalid("residual", "must be finite");
          p.residual = *v;
        }
      }
      break;
    case Family::baird:
      if (auto e = s.get_bool("exact")) p.exact = *e;
      break;
    case Family::mdp_file: {
      const auto path = s.get_string("fixture");
      if (!path) throw config::config_error(s.source(), s.line(), "[problem] mdp_file needs 'fixture'");
      std::filesystem::path fp(*path);
      if (fp.is_relative() && !base_dir.empty()) fp = std::filesystem::path(base_dir) / fp;
      p.fixture = fp.lexically_normal().string();
      if (auto e = s.get_bool("exact")) p.exact = *e;
      break;
    }
    case Family::meanvariance:
      read_positive(s, "dim", p.dim);
      read_positive(s, "samples", p.samples);
      read_nonneg(s, "lambda", p.lambda);
      read_nonneg(s, "data_noise", p.data_noise);
      read_seed(s, "instance_seed", p.instance_seed);
      break;
    case Family::nonconvex:
      read_positive(s, "dim", p.dim);
      read_positive(s, "rows", p.rows);
      read_nonneg(s, "noise", p.noise);
      read_seed(s, "instance_seed", p.instance_seed);
      break;
  }
  s.require_all_used("for family '" + std::string(to_string(*fam)) + "'");
  return p;
}

}  // namespace detail

/// Parse and validate an experiment. Every problem is instantiated once so
/// that construction errors surface as config errors before any run starts.
inline ExperimentConfig parse_experiment(const config::KeyValueFile& file) {
  using config::config_error;
  file.require_known_sections({"problem", "solver", "regularizer", "run"});
  ExperimentConfig e;
  e.source = file.source();
  const std::string base_dir =
      file.source().empty() ? std::string()
                            : std::filesystem::path(file.source()).parent_path().string();

  const auto& ps = file.section("problem");
  if (!file.has_section("problem")) throw config_error(file.source(), 0, "missing [problem] section");
  e.problem = detail::parse_problem(ps, base_dir);

  Index n = 0, m = 0;
  try {
    with_problem(e.problem, [&](auto factory) {
      auto oracle = factory(0);
      n = oracle.inner_dim();
      m = oracle.outer_dim();
      return 0;
    });
  } catch (const std::exception& ex) {
    throw config_error(file.source(), ps.line(), "[problem] invalid instance: " + std::string(ex.what()));
  }

  const auto& ss = file.section("solver");
  if (auto methods = ss.get_strings("methods")) {
    e.methods.clear();
    for (const auto& name : *methods) {
      const auto method = parse_method(name);
      if (!method) ss.invalid("methods", "unknown method '" + name + "' (use ascpg, scgd)");
      for (Method prev : e.methods) {
        if (prev == *method) ss.invalid("methods", "duplicate method '" + name + "'");
      }
      e.methods.push_back(*method);
    }
  }
  if (auto r = ss.get_string("regime")) {
    const auto regime = parse_regime(*r);
    if (!regime) ss.invalid("regime", "unknown regime '" + *r + "'");
    e.regime = regime;
    const Exponents ex = exponents(*regime);
    e.schedule.a = ex.a;
    e.schedule.b = ex.b;
    if (ss.has("a")) ss.invalid("a", "conflicts with 'regime'");
    if (ss.has("b")) ss.invalid("b", "conflicts with 'regime'");
  }
  if (auto v = ss.get_double("a")) e.schedule.a = *v;
  if (auto v = ss.get_double("b")) e.schedule.b = *v;
  if (auto v = ss.get_double("c_a")) e.schedule.c_a = *v;
  if (auto v = ss.get_double("c_b")) e.schedule.c_b = *v;
  if (auto v = ss.get_bool("clamp_beta")) e.schedule.clamp_beta = *v;
  try {
    e.schedule.validate();
  } catch (const std::exception& ex) {
    throw config_error(file.source(), ss.line(), "[solver] " + std::string(ex.what()));
  }
  detail::read_positive(ss, "iters", e.iters);
  detail::read_positive(ss, "trace_stride", e.trace_stride);
  if (auto v = ss.get_bool("warm_start_y")) e.warm_start_y = *v;
  if (auto v = ss.get_doubles("x1")) {
    detail::check_vector_size(ss, "x1", *v, n);
    e.x1 = *v;
  }
  if (auto v = ss.get_doubles("y0")) {
    if (e.warm_start_y) ss.invalid("y0", "only used with warm_start_y = false");
    detail::check_vector_size(ss, "y0", *v, m);
    e.y0 = *v;
  }
  if (auto v = ss.get_int("reference_iters")) {
    if (*v < 0) ss.invalid("reference_iters", "must be >= 0");
    e.reference_iters = static_cast<std::uint64_t>(*v);
  }
  detail::read_seed(ss, "reference_seed", e.reference_seed);
  ss.require_all_used();

  const auto& rs = file.section("regularizer");
  if (auto k = rs.get_string("kind")) {
    if (*k != "zero" && *k != "l1" && *k != "box") {
      rs.invalid("kind", "unknown kind '" + *k + "' (use zero, l1, box)");
    }
    e.regularizer.kind = *k;
  }
  if (e.regularizer.kind == "l1") {
    detail::read_nonneg(rs, "lambda", e.regularizer.lambda);
  } else if (e.regularizer.kind == "box") {
    if (auto v = rs.get_doubles("lo")) {
      detail::check_vector_size(rs, "lo", *v, n);
      e.regularizer.lo = *v;
    }
    if (auto v = rs.get_doubles("hi")) {
      detail::check_vector_size(rs, "hi", *v, n);
      e.regularizer.hi = *v;
    }
    const Vector lo = detail::expand(e.regularizer.lo, n);
    const Vector hi = detail::expand(e.regularizer.hi, n);
    if ((lo.array() > hi.array()).any()) rs.invalid("lo", "lo must not exceed hi");
  }
  rs.require_all_used("for kind '" + e.regularizer.kind + "'");

  const auto& run = file.section("run");
  if (auto list = run.get_ints("seed_list")) {
    if (run.has("seeds") || run.has("first_seed")) {
      run.invalid("seed_list", "conflicts with 'seeds' / 'first_seed'");
    }
    e.seeds.clear();
    for (auto v : *list) {
      if (v < 0) run.invalid("seed_list", "seeds must be >= 0");
      e.seeds.push_back(static_cast<std::uint64_t>(v));
    }
    e.explicit_seed_list = true;
  } else {
    std::uint64_t count = 1, first = 1;
    detail::read_positive(run, "seeds", count);
    detail::read_seed(run, "first_seed", first);
    e.seeds = seed_range(first, count);
  }
  if (auto w = run.get_int("workers")) {
    if (*w < 1) run.invalid("workers", "must be >= 1");
    e.workers = static_cast<unsigned>(*w);
  }
  if (auto o = run.get_string("out")) e.out = *o;
  if (auto f = run.get_string("field")) {
    if (*f != "auto") {
      const auto field = parse_field(*f);
      if (!field) run.invalid("field", "unknown field '" + *f + "'");
      e.field = field;
    }
  }
  if (auto a = run.get_string("axis")) {
    const auto axis = parse_axis(*a);
    if (!axis) run.invalid("axis", "unknown axis '" + *a + "' (use iters, queries)");
    e.axis = *axis;
  }
  run.require_all_used();
  return e;
}

inline ExperimentConfig parse_experiment(std::istream& is, const std::string& source = {}) {
  return parse_experiment(config::KeyValueFile::parse(is, source));
}

inline ExperimentConfig load_experiment(const std::string& path) {
  return parse_experiment(config::KeyValueFile::load(path));
}

// ---------------------------------------------------------------------------
// Effective-config echo: every setting written out explicitly, so the file
// re-runs to the same outputs.

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + config::format_double(v[i]);
  return out;
}

}  // namespace detail

inline void write_experiment(std::ostream& os, const ExperimentConfig& e) {
  using config::format_double;
  const ProblemConfig& p = e.problem;
  os << "# effective configuration\n";
  os << "[problem]\n";
  os << "family = " << to_string(p.family) << '\n';
  switch (p.family) {
    case Family::identity:
      os << "dim = " << p.dim << "\nnoise = " << format_double(p.noise) << '\n';
      break;
    case Family::linear:
      os << "dim = " << p.dim << "\nrows = " << p.rows
         << "\nnoise_matrix = " << format_double(p.linear_noise.inner_matrix)
         << "\nnoise_offset = " << format_double(p.linear_noise.inner_offset)
         << "\nnoise_outer = " << format_double(p.linear_noise.outer)
         << "\nsv_min = " << format_double(p.sv_min) << "\nsv_max = " << format_double(p.sv_max)
         << "\ninstance_seed = " << p.instance_seed << '\n';
      break;
    case Family::random_mdp:
    case Family::consistent_mdp:
      os << "states = " << p.mdp.states << "\nfeatures = " << p.mdp.features
         << "\nactions = " << p.mdp.actions << "\nnext_states = " << p.mdp.next_states
         << "\ngamma = " << format_double(p.mdp.gamma) << "\ninstance_seed = " << p.instance_seed
         << "\nexact = " << (p.exact ? "true" : "false") << '\n';
      if (p.family == Family::consistent_mdp) {
        os << "support = " << p.support << "\nresidual = " << format_double(p.residual) << '\n';
      }
      break;
    case Family::baird:
      os << "exact = " << (p.exact ? "true" : "false") << '\n';
      break;
    case Family::mdp_file:
      os << "fixture = " << std::filesystem::absolute(p.fixture).lexically_normal().string()
         << "\nexact = " << (p.exact ? "true" : "false") << '\n';
      break;
    case Family::meanvariance:
      os << "dim = " << p.dim << "\nsamples = " << p.samples
         << "\nlambda = " << format_double(p.lambda)
         << "\ndata_noise = " << format_double(p.data_noise)
         << "\ninstance_seed = " << p.instance_seed << '\n';
      break;
    case Family::nonconvex:
      os << "dim = " << p.dim << "\nrows = " << p.rows << "\nnoise = " << format_double(p.noise)
         << "\ninstance_seed = " << p.instance_seed << '\n';
      break;
  }

  os << "\n[solver]\nmethods = ";
  for (std::size_t i = 0; i < e.methods.size(); ++i) os << (i ? ", " : "") << to_string(e.methods[i]);
  os << '\n';
  if (e.regime) {
    os << "regime = " << to_string(*e.regime) << '\n';
  } else {
    os << "a = " << format_double(e.schedule.a) << "\nb = " << format_double(e.schedule.b) << '\n';
  }
  os << "c_a = " << format_double(e.schedule.c_a) << "\nc_b = " << format_double(e.schedule.c_b)
     << "\nclamp_beta = " << (e.schedule.clamp_beta ? "true" : "false") << "\niters = " << e.iters
     << "\ntrace_stride = " << e.trace_stride
     << "\nwarm_start_y = " << (e.warm_start_y ? "true" : "false") << '\n';
  if (!e.x1.empty()) os << "x1 = " << detail::join(e.x1) << '\n';
  if (!e.y0.empty()) os << "y0 = " << detail::join(e.y0) << '\n';
  os << "reference_iters = " << e.reference_iters << "\nreference_seed = " << e.reference_seed
     << '\n';

  os << "\n[regularizer]\nkind = " << e.regularizer.kind << '\n';
  if (e.regularizer.kind == "l1") os << "lambda = " << format_double(e.regularizer.lambda) << '\n';
  if (e.regularizer.kind == "box") {
    os << "lo = " << detail::join(e.regularizer.lo) << "\nhi = " << detail::join(e.regularizer.hi)
       << '\n';
  }

  os << "\n[run]\n";
  if (e.explicit_seed_list) {
    os << "seed_list = ";
    for (std::size_t i = 0; i < e.seeds.size(); ++i) os << (i ? ", " : "") << e.seeds[i];
    os << '\n';
  } else {
    os << "seeds = " << e.seeds.size() << "\nfirst_seed = " << (e.seeds.empty() ? 1 : e.seeds[0])
       << '\n';
  }
  os << "workers = " << e.workers << '\n';
  if (!e.out.empty()) os << "out = " << e.out << '\n';
  os << "field = " << (e.field ? std::string(to_string(*e.field)) : std::string("auto")) << '\n';
  os << "axis = " << to_string(e.axis) << '\n';
}

}  // namespace ascpg
