#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "preftune/acquisition.hpp"
#include "preftune/core.hpp"
#include "preftune/experiment.hpp"
#include "preftune/surrogate.hpp"

namespace preftune {

struct GlispConfig {
  std::size_t n_init = 10;
  std::size_t n_max = 50;
  double delta = 0.3;
  double sigma = 1e-6;
  double shape_init = 1.0;
  std::vector<std::size_t> cv_schedule{10, 20, 30, 40};
  std::size_t cv_folds = 3;
  RbfKind kind = RbfKind::InverseQuadratic;
  FitConfig fit;  // fit.sigma is overridden by `sigma`
  PsoConfig pso;  // pso.seed is derived per iteration from `seed`
  std::uint64_t seed = 0;

  /// 2 <= n_init <= n_max (n_init == n_max is a pure space-filling run),
  /// cv_folds >= 2, delta >= 0, sigma > 0, shape_init > 0.
  void validate() const;
};

enum class Phase { Initializing, Active, Finished };

std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

using QueryPair = std::pair<std::size_t, std::size_t>;

struct SessionState {
  ParamSpace space;
  GlispConfig config;
  PreferenceDataset dataset;
  // outcomes[i] belongs to sample i; missing until the experiment has run.
  std::vector<std::optional<ExperimentOutcome>> outcomes;
  std::optional<SurrogateModel> model;
  double shape = 1.0;
  std::size_t incumbent = 0;
  Phase phase = Phase::Initializing;
  std::optional<QueryPair> pending_query;  // (new sample, incumbent)
  std::vector<ParamVector> initial_design;
  std::vector<std::string> notes;  // non-fatal events (fit fallbacks, moved proposals)

  std::size_t num_samples() const { return dataset.size(); }
  /// Indices of samples whose experiment has not run yet.
  std::vector<std::size_t> missing_outcomes() const;
};

/// Latin-hypercube design of n_init points; samples 0 and 1 are revealed and
/// the first query is (0, 1). Experiments are not run here.
SessionState init_session(const ParamSpace& space, const GlispConfig& config);

/// Runs every experiment that has been requested but not executed.
void run_pending_experiments(SessionState& state, const ExperimentRunner& runner);

/// Records b = pi(theta_i, theta_j) for the pending pair (i, j), updates the
/// incumbent and, unless the budget is spent, adds the next sample (the next
/// design point during initialization, else the acquisition minimizer) and
/// queues (new, incumbent). Throws StateError without a pending query.
void submit_preference(SessionState& state, Preference b);

/// Smallest index that never lost a comparison.
std::size_t current_incumbent(const SessionState& state);

struct HistoryRow {
  std::size_t iter = 0;
  ParamVector theta;  // as run
  double score = 0.0;
  double incumbent_score = 0.0;
  double wall_time = 0.0;  // seconds since the start of the run
};

struct RunResult {
  std::size_t best_index = 0;
  ParamVector best_theta;
  ExperimentOutcome best_outcome;
  std::vector<HistoryRow> history;
  std::vector<ExperimentOutcome> outcomes;
  std::vector<double> scores;
  PreferenceDataset dataset;
};

/// Drives the preference loop with preferences derived from `oracle` values.
RunResult run_automated(const ParamSpace& space, const GlispConfig& config, const ExperimentRunner& runner,
                        const ValueOracle& oracle, double pref_tol = 0.0);

/// Value-based baseline: the surrogate interpolates the oracle values
/// directly; the acquisition has the same form.
RunResult run_glis_automated(const ParamSpace& space, const GlispConfig& config, const ExperimentRunner& runner,
                             const ValueOracle& oracle);

}  // namespace preftune
