#include "preftune/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "preftune/errors.hpp"
#include "rng.hpp"

namespace preftune {
namespace {

// Stream tags for per-iteration seeds, so a snapshot needs no RNG state.
constexpr std::uint64_t kDesignTag = 0;
constexpr std::uint64_t kPsoTag = 1000;
constexpr std::uint64_t kCvTag = 2000;
constexpr std::uint64_t kFallbackTag = 3000;

// Proposals closer than this (scaled space) to an existing sample are moved.
constexpr double kMinSeparation = 1e-6;

double min_distance(const Vec& x, const std::vector<Vec>& pts) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& p : pts) best = std::min(best, (x - p).norm());
  return best;
}

bool in_schedule(const GlispConfig& c, std::size_t n) {
  return std::find(c.cv_schedule.begin(), c.cv_schedule.end(), n) != c.cv_schedule.end();
}

FitConfig fit_config(const GlispConfig& c) {
  FitConfig f = c.fit;
  f.sigma = c.sigma;
  f.weights.clear();
  return f;
}

struct Proposal {
  Vec x;
  std::string note;
};

// Minimizes the acquisition over the scaled box and keeps the result away
// from existing samples (the dataset rejects duplicates).
Proposal propose(const SurrogateModel& model, const std::vector<Vec>& pts, const GlispConfig& cfg, std::size_t n) {
  const Acquisition acq(model, AcquisitionConfig{cfg.delta});
  PsoConfig pso = cfg.pso;
  pso.seed = detail::mix_seed(cfg.seed, kPsoTag + n);
  const PsoResult res = pso_minimize([&](std::span<const double> x) { return acq(x); }, model.dim(), pso);
  if (min_distance(res.x, pts) >= kMinSeparation) return {res.x, {}};

  std::vector<std::size_t> order(res.personal_best.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return res.personal_value[a] < res.personal_value[b]; });
  for (std::size_t p : order) {
    if (min_distance(res.personal_best[p], pts) >= kMinSeparation) {
      return {res.personal_best[p], "iteration " + std::to_string(n) +
                                        ": acquisition minimizer coincided with a sample, used the next best particle"};
    }
  }
  detail::Rng rng(detail::mix_seed(cfg.seed, kFallbackTag + n));
  Vec x(static_cast<Eigen::Index>(model.dim()));
  do {
    for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = rng.uniform(-1.0, 1.0);
  } while (min_distance(x, pts) < kMinSeparation);
  return {x, "iteration " + std::to_string(n) + ": swarm collapsed onto samples, used a random point"};
}

}  // namespace

void GlispConfig::validate() const {
  if (n_init < 2) throw ArgumentError("n_init must be >= 2");
  if (n_max < n_init) throw ArgumentError("n_max must be >= n_init");
  if (cv_folds < 2) throw ArgumentError("cv_folds must be >= 2");
  if (!(delta >= 0.0) || !std::isfinite(delta)) throw ArgumentError("delta must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("sigma must be > 0");
  if (!(shape_init > 0.0) || !std::isfinite(shape_init)) throw ArgumentError("shape_init must be > 0");
  if (!(fit.lambda >= 0.0) || !std::isfinite(fit.lambda)) throw ArgumentError("lambda must be >= 0");
  pso.validate();
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Initializing: return "initializing";
    case Phase::Active: return "active";
    case Phase::Finished: return "finished";
  }
  return "?";
}

Phase phase_from_string(std::string_view s) {
  if (s == "initializing") return Phase::Initializing;
  if (s == "active") return Phase::Active;
  if (s == "finished") return Phase::Finished;
  throw ArgumentError("unknown phase '" + std::string(s) + "'");
}

std::vector<std::size_t> SessionState::missing_outcomes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (i >= outcomes.size() || !outcomes[i]) out.push_back(i);
  }
  return out;
}

SessionState init_session(const ParamSpace& space, const GlispConfig& config) {
  config.validate();
  SessionState s{space, config, {}, {}, std::nullopt, config.shape_init, 0, Phase::Initializing, std::nullopt, {}, {}};
  s.initial_design = latin_hypercube(config.n_init, space, detail::mix_seed(config.seed, kDesignTag));
  s.dataset.add_sample(s.initial_design[0]);
  s.dataset.add_sample(s.initial_design[1]);
  s.pending_query = QueryPair{0, 1};
  return s;
}

void run_pending_experiments(SessionState& state, const ExperimentRunner& runner) {
  state.outcomes.resize(state.dataset.size());
  for (std::size_t i : state.missing_outcomes()) {
    state.outcomes[i] = runner(state.dataset.samples()[i]);
  }
}

std::size_t current_incumbent(const SessionState& state) {
  return state.dataset.num_prefs() == 0 ? 0 : best_so_far(state.dataset);
}

void submit_preference(SessionState& state, Preference b) {
  if (!state.pending_query) throw StateError("no pending query to answer");
  const auto [i, j] = *state.pending_query;
  state.dataset.add_preference(i, j, b);
  state.pending_query.reset();
  state.incumbent = current_incumbent(state);

  const GlispConfig& cfg = state.config;
  const std::size_t n = state.dataset.size();
  if (n >= cfg.n_max) {
    state.phase = Phase::Finished;
    return;
  }
  if (n < cfg.n_init) {
    state.dataset.add_sample(state.initial_design[n]);
    state.pending_query = QueryPair{n, state.incumbent};
    return;
  }

  state.phase = Phase::Active;
  const std::vector<Vec> pts = scaled_samples(state.dataset, state.space);
  const FitConfig fcfg = fit_config(cfg);
  if (in_schedule(cfg, n) && state.dataset.num_prefs() >= cfg.cv_folds) {
    const std::vector<double> grid = default_shape_grid(state.shape);
    state.shape = cross_validate_shape(pts, state.dataset.prefs(), cfg.kind, grid, cfg.cv_folds, fcfg,
                                       detail::mix_seed(cfg.seed, kCvTag + n));
  }
  Proposal next;
  try {
    PreferenceFit fit = fit_preference_surrogate(pts, state.dataset.prefs(), cfg.kind, state.shape, fcfg);
    state.model = std::move(fit.model);
    next = propose(*state.model, pts, cfg, n);
  } catch (const FitError& e) {
    // Explore only: a flat surrogate leaves -delta * z as the acquisition.
    state.notes.push_back("iteration " + std::to_string(n) + ": " + e.what() + "; exploring instead");
    SurrogateModel flat(cfg.kind, state.shape, pts, Vec::Zero(static_cast<Eigen::Index>(pts.size())), cfg.sigma);
    next = propose(flat, pts, cfg, n);
  }
  if (!next.note.empty()) state.notes.push_back(next.note);
  const std::size_t idx = state.dataset.add_sample(unscale_from_unit(
      std::span<const double>(next.x.data(), static_cast<std::size_t>(next.x.size())), state.space));
  state.pending_query = QueryPair{idx, state.incumbent};
}

RunResult run_automated(const ParamSpace& space, const GlispConfig& config, const ExperimentRunner& runner,
                        const ValueOracle& oracle, double pref_tol) {
  if (!(pref_tol >= 0.0)) throw ArgumentError("preference tolerance must be >= 0");
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  RunResult r;
  SessionState s = init_session(space, config);
  std::vector<double> wall;
  auto sync = [&] {
    run_pending_experiments(s, runner);
    while (r.scores.size() < s.outcomes.size()) {
      r.scores.push_back(oracle(*s.outcomes[r.scores.size()]));
      wall.push_back(elapsed());
    }
  };
  sync();
  // incumbent_after[k]: incumbent once sample k has been compared.
  std::vector<std::size_t> incumbent_after{0};
  while (s.pending_query) {
    const auto [i, j] = *s.pending_query;
    submit_preference(s, preference_from_values(r.scores[i], r.scores[j], pref_tol));
    const std::size_t newer = std::max(i, j);
    incumbent_after.resize(newer + 1, s.incumbent);
    incumbent_after[newer] = s.incumbent;
    sync();
  }

  r.best_index = s.incumbent;
  r.best_theta = s.dataset.samples()[s.incumbent];
  r.dataset = s.dataset;
  for (auto& o : s.outcomes) r.outcomes.push_back(std::move(*o));
  r.best_outcome = r.outcomes[r.best_index];
  for (std::size_t k = 0; k < r.outcomes.size(); ++k) {
    r.history.push_back({k, r.outcomes[k].applied, r.scores[k], r.scores[incumbent_after[k]], wall[k]});
  }
  return r;
}

RunResult run_glis_automated(const ParamSpace& space, const GlispConfig& config, const ExperimentRunner& runner,
                             const ValueOracle& oracle) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunResult r;
  std::vector<Vec> pts;
  std::size_t best = 0;
  auto evaluate = [&](const ParamVector& theta) {
    r.dataset.add_sample(theta);
    pts.push_back(scale_to_unit(theta, space));
    r.outcomes.push_back(runner(theta));
    const double v = oracle(r.outcomes.back());
    if (!std::isfinite(v)) throw OptimizationError("oracle returned a non-finite value");
    r.scores.push_back(v);
    const std::size_t k = r.scores.size() - 1;
    if (r.scores[k] < r.scores[best]) best = k;
    r.history.push_back({k, r.outcomes.back().applied, v, r.scores[best],
                         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };

  for (const ParamVector& th : latin_hypercube(config.n_init, space, detail::mix_seed(config.seed, kDesignTag))) {
    evaluate(th);
  }
  double shape = config.shape_init;
  for (std::size_t n = config.n_init; n < config.n_max; ++n) {
    if (in_schedule(config, n)) {
      const std::vector<double> grid = default_shape_grid(shape);
      shape = cross_validate_shape_values(pts, r.scores, config.kind, grid, config.cv_folds, config.fit.lambda,
                                          detail::mix_seed(config.seed, kCvTag + n));
    }
    Proposal next;
    try {
      const SurrogateModel model = fit_value_surrogate(pts, r.scores, config.kind, shape, config.fit.lambda,
                                                       config.sigma);
      next = propose(model, pts, config, n);
    } catch (const FitError&) {
      const SurrogateModel flat(config.kind, shape, pts, Vec::Zero(static_cast<Eigen::Index>(pts.size())),
                                config.sigma);
      next = propose(flat, pts, config, n);
    }
    evaluate(unscale_from_unit(std::span<const double>(next.x.data(), static_cast<std::size_t>(next.x.size())),
                               space));
  }
  r.best_index = best;
  r.best_theta = r.dataset.samples()[best];
  r.best_outcome = r.outcomes[best];
  return r;
}

}  // namespace preftune
