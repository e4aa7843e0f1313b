#include "preftune/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "preftune/benchmarks.hpp"
#include "preftune/errors.hpp"
#include "preftune/scenarios.hpp"
#include "preftune/service.hpp"
#include "preftune/session_io.hpp"

namespace preftune {
namespace fs = std::filesystem;

namespace {

struct Overrides {
  std::optional<std::size_t> n_init, n_max, cv_folds, swarm, pso_iters;
  std::optional<double> delta, sigma, shape_init, lambda;
  std::optional<std::string> kind;

  void attach(CLI::App* app) {
    app->add_option("--n-init", n_init, "Initial Latin-hypercube samples");
    app->add_option("--n-max", n_max, "Experiment budget");
    app->add_option("--delta", delta, "Exploration weight");
    app->add_option("--sigma", sigma, "Preference margin");
    app->add_option("--shape-init", shape_init, "Initial RBF shape parameter");
    app->add_option("--cv-folds", cv_folds, "Cross-validation folds");
    app->add_option("--lambda", lambda, "Ridge weight of the surrogate fit");
    app->add_option("--kind", kind, "RBF kind: inverse_quadratic, gaussian or thin_plate_spline");
    app->add_option("--swarm", swarm, "PSO swarm size");
    app->add_option("--pso-iters", pso_iters, "PSO iterations");
  }

  GlispConfig apply(std::uint64_t seed) const {
    GlispConfig c;
    c.seed = seed;
    if (n_init) c.n_init = *n_init;
    if (n_max) c.n_max = *n_max;
    if (cv_folds) c.cv_folds = *cv_folds;
    if (swarm) c.pso.swarm_size = *swarm;
    if (pso_iters) c.pso.max_iters = *pso_iters;
    if (delta) c.delta = *delta;
    if (sigma) c.sigma = *sigma;
    if (shape_init) c.shape_init = *shape_init;
    if (lambda) c.fit.lambda = *lambda;
    if (kind) c.kind = rbf_kind_from_string(*kind);
    c.validate();
    return c;
  }
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PREF_TUNE_SEED"); env && *env) {
    const std::string s(env);
    if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 20) {
      throw ArgumentError("PREF_TUNE_SEED must be a non-negative integer");
    }
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      throw ArgumentError("PREF_TUNE_SEED is out of range");
    }
  }
  return 0;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

Json metrics_json(const ExperimentOutcome& o) {
  Json m = Json::object();
  for (const auto& [k, v] : o.metrics) m[k] = number_to_json(v);
  return m;
}

Json theta_json(const ParamSpace& space, const ParamVector& theta) {
  Json t = Json::object();
  for (std::size_t d = 0; d < space.dim(); ++d) t[space[d].name] = number_to_json(theta[d]);
  return t;
}

void write_run(const fs::path& out, const ScenarioBinding& sc, const GlispConfig& cfg, const RunResult& r,
               const std::string& method, bool with_wall_time) {
  for (std::size_t k = 0; k < r.outcomes.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "experiment_%03zu.csv", k);
    write_file(out / "experiments" / name, trajectory_csv(r.outcomes[k].trajectory));
  }
  write_file(out / "history.csv", history_csv(sc.space, r.history, with_wall_time));
  const Json summary{{"method", method},
                     {"scenario", sc.kind},
                     {"config", to_json(cfg)},
                     {"num_experiments", r.outcomes.size()},
                     {"num_preferences", r.dataset.num_prefs()},
                     {"best_index", r.best_index},
                     {"best_theta", theta_json(sc.space, r.best_outcome.applied)},
                     {"best_score", number_to_json(r.scores[r.best_index])},
                     {"best_status", std::string(to_string(r.best_outcome.status))},
                     {"best_metrics", metrics_json(r.best_outcome)}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
}

void print_best(const ScenarioBinding& sc, const RunResult& r) {
  std::cout << "best experiment " << r.best_index << " of " << r.outcomes.size() << ":";
  for (std::size_t d = 0; d < sc.space.dim(); ++d) {
    std::cout << " " << sc.space[d].name << "=" << format_number(r.best_outcome.applied[d]);
  }
  std::cout << " score=" << format_number(r.scores[r.best_index]) << " status=" << to_string(r.best_outcome.status)
            << "\n";
}

}  // namespace

std::string history_csv(const ParamSpace& space, const std::vector<HistoryRow>& rows, bool with_wall_time) {
  std::string out = "iter";
  for (const ParamSpec& p : space.specs()) out += "," + p.name;
  out += ",score,incumbent_score,wall_time\n";
  for (const HistoryRow& h : rows) {
    out += std::to_string(h.iter);
    for (double v : h.theta) out += "," + format_number(v);
    out += "," + format_number(h.score) + "," + format_number(h.incumbent_score) + "," +
           format_number(with_wall_time ? h.wall_time : 0.0) + "\n";
  }
  return out;
}

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = std::min(text.find(',', pos), text.size());
    const std::string tok = text.substr(pos, comma - pos);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (tok.empty() || used != tok.size()) throw ArgumentError("bad number '" + tok + "' in '" + text + "'");
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Preference-based MPC calibration", "preftune"};
  app.require_subcommand(1);

  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string output = "out";
  bool wall_time = false;
  double pref_tol = 0.0;
  Overrides ov;

  CLI::App* auto_cmd = app.add_subcommand("run-auto", "Preference loop driven by the scenario's synthetic judge");
  CLI::App* glis_cmd = app.add_subcommand("run-glis", "Value-based baseline loop on the same judge");
  for (CLI::App* c : {auto_cmd, glis_cmd}) {
    c->add_option("--scenario", scenario, "cstr, driving or bench:<fn>[:<dim>]")->required();
    c->add_option("--seed", seed, "Random seed (falls back to PREF_TUNE_SEED, then 0)");
    c->add_option("--output", output, "Output directory")->capture_default_str();
    c->add_flag("--wall-time", wall_time, "Record elapsed seconds in history.csv instead of 0");
    ov.attach(c);
  }
  auto_cmd->add_option("--pref-tol", pref_tol, "Score difference treated as a tie")->check(CLI::NonNegativeNumber);

  std::string theta_text;
  CLI::App* replay_cmd = app.add_subcommand("replay", "Run one experiment and export its trajectory");
  replay_cmd->add_option("--scenario", scenario, "cstr, driving or bench:<fn>[:<dim>]")->required();
  replay_cmd->add_option("--theta", theta_text, "Comma-separated tuning vector, e.g. 0.31,26,-1.79")->required();
  replay_cmd->add_option("--output", output, "Output directory")->capture_default_str();

  std::string fn = "all";
  std::size_t dim = 2;
  std::string method = "glisp";
  std::optional<std::string> bench_out;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Run the optimizer on analytic test functions");
  bench_cmd->add_option("--fn", fn, "sphere, two_well, sin_quad or all")->capture_default_str();
  bench_cmd->add_option("--dim", dim, "Dimension (sphere only)")->capture_default_str();
  bench_cmd->add_option("--seed", seed, "Random seed (falls back to PREF_TUNE_SEED, then 0)");
  bench_cmd->add_option("--method", method, "glisp or glis")->check(CLI::IsMember({"glisp", "glis"}));
  bench_cmd->add_option("--output", bench_out, "Write history and summary per function here");
  ov.attach(bench_cmd);

  ServeOptions serve_opts;
  std::optional<int> port;
  std::optional<std::string> data_dir;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Start the HTTP session service");
  serve_cmd->add_option("--port", port, "Port (default PREF_TUNE_PORT or 8080)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--data", data_dir, "Session directory (default PREF_TUNE_DATA or ./sessions)");
  serve_cmd->add_option("--host", serve_opts.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--timeout", serve_opts.request_timeout_s, "Request timeout in seconds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::vector<const char*> argv{"preftune"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code != 0) std::cerr << app.help();
    return code == 0 ? 0 : 2;
  }

  try {
    if (auto_cmd->parsed() || glis_cmd->parsed()) {
      const ScenarioBinding sc = make_scenario(scenario);
      const GlispConfig cfg = ov.apply(resolve_seed(seed));
      const bool pref = auto_cmd->parsed();
      const RunResult r = pref ? run_automated(sc.space, cfg, sc.runner, sc.oracle, pref_tol)
                               : run_glis_automated(sc.space, cfg, sc.runner, sc.oracle);
      write_run(output, sc, cfg, r, pref ? "glisp" : "glis", wall_time);
      print_best(sc, r);
      return 0;
    }
    if (replay_cmd->parsed()) {
      const ScenarioBinding sc = make_scenario(scenario);
      const std::vector<double> theta = parse_number_list(theta_text);
      if (theta.size() != sc.space.dim()) {
        throw ArgumentError("scenario '" + scenario + "' takes " + std::to_string(sc.space.dim()) + " values");
      }
      if (!sc.space.contains(theta)) throw BoundsError("theta lies outside the tuning box");
      const ExperimentOutcome o = sc.runner(theta);
      const double score = sc.oracle(o);
      write_file(fs::path(output) / "trajectory.csv", trajectory_csv(o.trajectory));
      const Json m{{"scenario", sc.kind},
                   {"theta", theta_json(sc.space, o.applied)},
                   {"status", std::string(to_string(o.status))},
                   {"message", o.message},
                   {"score", number_to_json(score)},
                   {"metrics", metrics_json(o)}};
      write_file(fs::path(output) / "metrics.json", m.dump(2) + "\n");
      std::cout << "status=" << to_string(o.status) << " score=" << format_number(score);
      for (const auto& [k, v] : o.metrics) std::cout << " " << k << "=" << format_number(v);
      std::cout << "\n";
      return 0;
    }
    if (bench_cmd->parsed()) {
      const std::vector<std::string> fns = fn == "all" ? benchmark_names() : std::vector<std::string>{fn};
      const GlispConfig cfg = ov.apply(resolve_seed(seed));
      for (const std::string& name : fns) {
        const BenchmarkFunction b = make_benchmark(name, dim);
        const ScenarioBinding sc = make_scenario("bench:" + name + ":" + std::to_string(dim));
        const RunResult r = method == "glisp" ? run_automated(sc.space, cfg, sc.runner, sc.oracle)
                                              : run_glis_automated(sc.space, cfg, sc.runner, sc.oracle);
        const GridExtrema ext = grid_extrema(b);
        const double best = r.scores[r.best_index];
        const double range = ext.max - b.min_value;
        std::cout << name << " dim=" << dim << " best=" << format_number(best)
                  << " minimum=" << format_number(b.min_value) << " gap=" << format_number(best - b.min_value)
                  << " gap_over_range=" << format_number((best - b.min_value) / range) << "\n";
        if (bench_out) write_run(fs::path(*bench_out) / name, sc, cfg, r, method, false);
      }
      return 0;
    }
    if (serve_cmd->parsed()) {
      const ServeOptions env = serve_options_from_env();
      serve_opts.port = port.value_or(env.port);
      serve_opts.data_dir = data_dir ? fs::path(*data_dir) : env.data_dir;
      std::cout << "listening on " << serve_opts.host << ":" << serve_opts.port << ", sessions in "
                << serve_opts.data_dir.string() << std::endl;
      if (!serve(serve_opts)) {
        std::cerr << "error: cannot listen on " << serve_opts.host << ":" << serve_opts.port << "\n";
        return 1;
      }
      return 0;
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace preftune
