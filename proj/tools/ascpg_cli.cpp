// ascpg: run experiments, fit rate slopes, verify problem properties.
//
//   ascpg run --config exp.ini [--out DIR] [--workers N] [--axis iters|queries]
//             [--set section.key=value]...
//   ascpg slope FILE.csv [--window LO,HI] [--axis A] [--field F] [--out DIR]
//   ascpg verify [FAMILY] [--config exp.ini] [--param key=value]... [--seed N]
//
// Exit codes: 0 ok, 1 I/O or internal error, 2 invalid config or usage,
// 3 divergence (outputs written so far are kept), 4 nonpositive value in the
// slope window, 5 a verify property failed.

#include "ascpg/ascpg.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ascpg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitNonpositive = 4;
constexpr int kExitVerify = 5;

constexpr const char* kOutEnv = "ASCPG_OUT_DIR";

std::string resolve_out(const std::string& flag, const std::string& from_config,
                        const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  if (const char* env = std::getenv(kOutEnv); env && *env) return env;
  return fallback;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json fit_json(const SlopeFit& fit) {
  return json{{"slope", fit.slope},
              {"intercept", fit.intercept},
              {"r2", fit.r2},
              {"window", {fit.k_lo, fit.k_hi}},
              {"points", fit.points}};
}

std::pair<double, double> parse_window(const std::string& text) {
  const auto sep = text.find_first_of(",:");
  if (sep == std::string::npos) throw std::invalid_argument("--window expects LO,HI");
  std::size_t used = 0;
  const std::string a = text.substr(0, sep), b = text.substr(sep + 1);
  const double lo = std::stod(a, &used);
  if (used != a.size()) throw std::invalid_argument("--window: bad number '" + a + "'");
  const double hi = std::stod(b, &used);
  if (used != b.size()) throw std::invalid_argument("--window: bad number '" + b + "'");
  if (!(lo < hi)) throw std::invalid_argument("--window: need LO < HI");
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// run

struct RunOptions {
  std::string config;
  std::string out;
  unsigned workers = 0;
  std::string axis;
  std::vector<std::string> overrides;
};

template <class Factory>
int run_experiment(const ExperimentConfig& e, Factory factory, const fs::path& out) {
  using O = decltype(factory(std::uint64_t{0}));
  Index n = 0, m = 0;
  {
    auto probe = factory(0);
    n = probe.inner_dim();
    m = probe.outer_dim();
  }

  std::optional<Vector> reference;
  if (e.reference_iters > 0) {
    SolverConfig rc = solver_config(e, Method::ascpg, n, m);
    rc.max_iters = e.reference_iters;
    rc.trace_stride = e.reference_iters;
    rc.seed = e.reference_seed;
    auto oracle = factory(e.reference_seed);
    reference = run(oracle, rc).final_x;
    std::ofstream ref(out / "reference.csv");
    for (Index i = 0; i < reference->size(); ++i) {
      ref << config::format_double((*reference)[i]) << '\n';
    }
    std::cout << "reference solution from " << e.reference_iters << " iterations (seed "
              << e.reference_seed << ")\n";
  }

  Field field = Field::grad_norm_sq_avg;
  if (e.field) {
    field = *e.field;
  } else if (reference || HasSolutionSet<O>) {
    field = Field::dist_sq;
  }

  bool diverged = false;
  for (Method method : e.methods) {
    SolverConfig cfg = solver_config(e, method, n, m);
    cfg.reference = reference;
    const auto results = run_seeds(factory, cfg, e.seeds, e.workers);
    const std::string tag(to_string(method));
    for (const auto& r : results) {
      save_trace_csv((out / ("trace_" + tag + "_seed" + std::to_string(r.seed) + ".csv")).string(),
                     r.trace);
      if (r.divergence) {
        diverged = true;
        std::cerr << tag << " seed " << r.seed << ": " << *r.divergence << '\n';
      }
    }
    const auto traces = completed_traces(results);
    json summary{{"method", tag},
                 {"field", std::string(to_string(field))},
                 {"axis", std::string(to_string(e.axis))},
                 {"n_seeds", traces.size()},
                 {"diverged", results.size() - traces.size()}};
    if (traces.empty()) {
      summary["error"] = "no completed runs";
      write_json(out / ("slope_" + tag + ".json"), summary);
      continue;
    }
    AggregateSeries agg;
    try {
      agg = aggregate(traces, field, e.axis);
    } catch (const std::invalid_argument& ex) {
      summary["error"] = ex.what();
      write_json(out / ("slope_" + tag + ".json"), summary);
      std::cerr << tag << ": " << ex.what() << '\n';
      continue;
    }
    save_aggregate_csv((out / ("aggregate_" + tag + ".csv")).string(), agg);
    try {
      const SlopeFit fit = fit_slope(agg);
      summary.update(fit_json(fit));
      std::cout << tag << ": " << to_string(field) << " slope " << fit.slope << " r2 " << fit.r2
                << " over " << to_string(e.axis) << " [" << fit.k_lo << ", " << fit.k_hi
                << "], final mean " << agg.mean.back() << " (" << traces.size() << " runs)\n";
    } catch (const std::invalid_argument& ex) {
      summary["error"] = ex.what();
      std::cout << tag << ": no slope (" << ex.what() << ")\n";
    }
    write_json(out / ("slope_" + tag + ".json"), summary);
  }
  return diverged ? kExitDiverged : kExitOk;
}

int cmd_run(const RunOptions& opt) {
  ExperimentConfig e;
  try {
    auto file = config::KeyValueFile::load(opt.config);
    for (const auto& o : opt.overrides) file.assign(o);
    e = parse_experiment(file);
  } catch (const config::config_error& ex) {
    std::cerr << "invalid config: " << ex.what() << '\n';
    return kExitConfig;
  }
  if (opt.workers > 0) e.workers = opt.workers;
  if (!opt.axis.empty()) e.axis = *parse_axis(opt.axis);
  e.out = resolve_out(opt.out, e.out, "ascpg_out");
  const fs::path out(e.out);
  fs::create_directories(out);
  {
    std::ofstream echo(out / "effective_config.ini");
    write_experiment(echo, e);
  }
  return with_problem(e.problem, [&](auto factory) { return run_experiment(e, factory, out); });
}

// ---------------------------------------------------------------------------
// slope

struct SlopeOptions {
  std::string input;
  std::string window;
  std::string axis;
  std::string field = "dist_sq";
  std::string out;
};

int cmd_slope(const SlopeOptions& opt) {
  std::ifstream in(opt.input);
  if (!in) {
    std::cerr << "cannot open " << opt.input << '\n';
    return kExitError;
  }
  std::string header;
  std::getline(in, header);
  in.seekg(0);

  AggregateSeries series;
  json meta{{"source", opt.input}};
  try {
    if (config::trim(header) == kTraceHeader) {
      const auto field = parse_field(opt.field);
      if (!field) throw std::invalid_argument("unknown field '" + opt.field + "'");
      const Axis axis = opt.axis.empty() ? Axis::queries : *parse_axis(opt.axis);
      const std::vector<RunTrace> one{read_trace_csv(in)};
      series = aggregate(one, *field, axis);
      meta["field"] = opt.field;
    } else {
      series = read_aggregate_csv(in);
      if (!opt.axis.empty() && *parse_axis(opt.axis) != series.axis) {
        throw std::invalid_argument("--axis " + opt.axis + " does not match the file's axis '" +
                                    std::string(to_string(series.axis)) + "'");
      }
    }
  } catch (const std::exception& ex) {
    std::cerr << "invalid input: " << ex.what() << '\n';
    return kExitConfig;
  }
  meta["axis"] = std::string(to_string(series.axis));

  SlopeFit fit;
  try {
    const auto window = opt.window.empty() ? default_window(series) : parse_window(opt.window);
    fit = fit_slope(series, window);
  } catch (const nonpositive_value_error& ex) {
    std::cerr << ex.what() << '\n';
    return kExitNonpositive;
  } catch (const std::exception& ex) {
    std::cerr << "cannot fit: " << ex.what() << '\n';
    return kExitConfig;
  }

  const fs::path src(opt.input);
  const fs::path out_dir = resolve_out(opt.out, "", src.parent_path().string());
  fs::create_directories(out_dir.empty() ? fs::path(".") : out_dir);
  json j = fit_json(fit);
  j.update(meta);
  write_json((out_dir.empty() ? fs::path(".") : out_dir) / (src.stem().string() + "_slope.json"), j);
  std::cout << std::fixed;
  std::cout.precision(6);
  std::cout << "slope " << fit.slope << " r2 " << fit.r2 << " window [" << fit.k_lo << ", "
            << fit.k_hi << "] points " << fit.points << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyCliOptions {
  std::string family;
  std::string config;
  std::string fixture;
  std::vector<std::string> params;
  std::uint64_t seed = 1;
  int draws = 10000;
  std::string out;
};

int cmd_verify(const VerifyCliOptions& opt) {
  ProblemConfig problem;
  try {
    std::unique_ptr<config::KeyValueFile> file;
    if (!opt.config.empty()) {
      if (!opt.family.empty() || !opt.params.empty() || !opt.fixture.empty()) {
        throw config::config_error("", 0, "--config cannot be combined with a family or --param");
      }
      file = std::make_unique<config::KeyValueFile>(config::KeyValueFile::load(opt.config));
    } else {
      if (opt.family.empty()) throw config::config_error("", 0, "give a FAMILY or --config");
      std::ostringstream text;
      text << "[problem]\nfamily = " << opt.family << '\n';
      if (!opt.fixture.empty()) text << "fixture = " << fs::absolute(opt.fixture).string() << '\n';
      for (const auto& p : opt.params) {
        if (p.find('=') == std::string::npos) {
          throw config::config_error("--param", 0, "expected key=value, got '" + p + "'");
        }
        text << p << '\n';
      }
      std::istringstream is(text.str());
      file = std::make_unique<config::KeyValueFile>(config::KeyValueFile::parse(is, "--param"));
    }
    const std::string base = opt.config.empty() ? std::string()
                                                : fs::path(opt.config).parent_path().string();
    problem = detail::parse_problem(file->section("problem"), base);
  } catch (const config::config_error& ex) {
    std::cerr << "invalid config: " << ex.what() << '\n';
    return kExitConfig;
  }

  VerifyOptions vo;
  vo.seed = opt.seed;
  vo.draws = opt.draws;
  std::vector<CheckResult> checks;
  try {
    checks = verify_problem(problem, vo);
  } catch (const std::exception& ex) {
    checks.push_back({"problem loads", false, ex.what()});
  }

  const std::string family(to_string(problem.family));
  json report{{"family", family}, {"seed", opt.seed}, {"checks", json::array()}};
  std::vector<std::string> failed;
  for (const auto& c : checks) {
    std::cout << c.name << ": " << (c.pass ? "PASS" : "FAIL");
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << '\n';
    report["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
    if (!c.pass) failed.push_back(c.name);
  }
  report["pass"] = failed.empty();
  const fs::path out(resolve_out(opt.out, "", "ascpg_out"));
  fs::create_directories(out);
  write_json(out / ("verify_" + family + ".json"), report);
  if (!failed.empty()) {
    std::cerr << "verify failed:";
    for (const auto& f : failed) std::cerr << " [" << f << "]";
    std::cerr << '\n';
    return kExitVerify;
  }
  std::cout << "verify " << family << ": all " << checks.size() << " checks passed\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic compositional proximal gradient experiments"};
  app.require_subcommand(1);
  const std::vector<std::string> axes{"iters", "queries"};

  RunOptions run_opt;
  auto* run_cmd = app.add_subcommand("run", "Run every (method, seed) pair of an experiment");
  run_cmd->add_option("--config", run_opt.config, "Experiment config file")->required();
  run_cmd->add_option("--out", run_opt.out, "Output directory (default: config, then $" +
                                                std::string(kOutEnv) + ", then ./ascpg_out)");
  run_cmd->add_option("--workers", run_opt.workers, "Parallel runs")->check(CLI::PositiveNumber);
  run_cmd->add_option("--axis", run_opt.axis, "Aggregate axis")->check(CLI::IsMember(axes));
  run_cmd->add_option("--set", run_opt.overrides, "Override a config value: section.key=value");

  SlopeOptions slope_opt;
  auto* slope_cmd = app.add_subcommand("slope", "Fit a log-log slope to an aggregate or trace CSV");
  slope_cmd->add_option("input", slope_opt.input, "Aggregate or trace CSV")->required();
  slope_cmd->add_option("--window", slope_opt.window, "Fit window LO,HI on the axis");
  slope_cmd->add_option("--axis", slope_opt.axis, "Axis (trace input)")->check(CLI::IsMember(axes));
  slope_cmd->add_option("--field", slope_opt.field, "Traced field (trace input)");
  slope_cmd->add_option("--out", slope_opt.out, "Directory for the slope JSON");

  VerifyCliOptions verify_opt;
  auto* verify_cmd = app.add_subcommand("verify", "Check oracle and model properties of a family");
  verify_cmd->add_option("family", verify_opt.family, "Problem family");
  verify_cmd->add_option("--config", verify_opt.config, "Config file ([problem] section is used)");
  verify_cmd->add_option("--fixture", verify_opt.fixture, "MDP fixture (family mdp_file)");
  verify_cmd->add_option("--param", verify_opt.params, "Problem setting key=value");
  verify_cmd->add_option("--seed", verify_opt.seed, "Oracle seed");
  verify_cmd->add_option("--draws", verify_opt.draws, "Monte-Carlo draws per point")
      ->check(CLI::Range(100, 100000000));
  verify_cmd->add_option("--out", verify_opt.out, "Directory for the JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_opt);
    if (slope_cmd->parsed()) return cmd_slope(slope_opt);
    if (verify_cmd->parsed()) return cmd_verify(verify_opt);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
