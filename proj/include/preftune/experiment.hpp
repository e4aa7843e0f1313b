#pragma once

#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "preftune/core.hpp"

namespace preftune {

/// One row per MPC step: the measured state at `time`, the input applied over
/// the following sample, the outputs at `time`, and the controller's compute
/// time for that step (seconds).
struct Trajectory {
  std::vector<std::string> state_names;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> outputs;
  std::vector<double> solve_times;

  std::size_t size() const { return times.size(); }
  void append(double t, std::vector<double> x, std::vector<double> u, std::vector<double> y, double solve_time);
  /// Throws ArgumentError on ragged rows or non-increasing times.
  void validate() const;
  /// Column of a named state, input or output.
  std::vector<double> column(std::string_view name) const;
};

enum class OutcomeStatus { Completed, TimeCapped, InterruptedUnsafe, MpcFailure };

std::string_view to_string(OutcomeStatus s);
OutcomeStatus outcome_status_from_string(std::string_view s);

struct ExperimentOutcome {
  ParamVector theta;    // as sampled (continuous)
  ParamVector applied;  // as run (integer knobs rounded)
  Trajectory trajectory;
  OutcomeStatus status = OutcomeStatus::Completed;
  std::map<std::string, double> metrics;
  // Extra per-step signals for plotting and scoring (same length as the trajectory).
  std::map<std::string, std::vector<double>> series;
  std::string message;

  /// Throws ArgumentError if the metric is missing.
  double metric(const std::string& name) const;
};

using ExperimentRunner = std::function<ExperimentOutcome(const ParamVector&)>;
using ValueOracle = std::function<double(const ExperimentOutcome&)>;

/// `time,<states>,<inputs>,<outputs>,solve_time`, one row per step, numbers
/// in shortest round-trip form.
std::string trajectory_csv(const Trajectory& t);

/// Shortest round-trip decimal form used by every text artifact.
std::string format_number(double v);

}  // namespace preftune
