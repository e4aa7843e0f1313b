#include "preftune/experiment.hpp"

#include <charconv>
#include <cmath>
#include <optional>
#include <string>

#include "preftune/errors.hpp"

namespace preftune {

void Trajectory::append(double t, std::vector<double> x, std::vector<double> u, std::vector<double> y,
                        double solve_time) {
  times.push_back(t);
  states.push_back(std::move(x));
  inputs.push_back(std::move(u));
  outputs.push_back(std::move(y));
  solve_times.push_back(solve_time);
}

void Trajectory::validate() const {
  const std::size_t n = times.size();
  if (states.size() != n || inputs.size() != n || outputs.size() != n || solve_times.size() != n) {
    throw ArgumentError("trajectory columns have different lengths");
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (states[k].size() != state_names.size() || inputs[k].size() != input_names.size() ||
        outputs[k].size() != output_names.size()) {
      throw ArgumentError("trajectory row width does not match the column names");
    }
    if (k > 0 && !(times[k] > times[k - 1])) throw ArgumentError("trajectory times must increase strictly");
  }
}

std::vector<double> Trajectory::column(std::string_view name) const {
  auto pick = [&](const std::vector<std::string>& names, const std::vector<std::vector<double>>& rows)
      -> std::optional<std::vector<double>> {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (names[c] == name) {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(r[c]);
        return out;
      }
    }
    return std::nullopt;
  };
  if (name == "time") return times;
  if (name == "solve_time") return solve_times;
  if (auto c = pick(state_names, states)) return *c;
  if (auto c = pick(input_names, inputs)) return *c;
  if (auto c = pick(output_names, outputs)) return *c;
  throw ArgumentError("unknown trajectory column '" + std::string(name) + "'");
}

std::string_view to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::Completed: return "completed";
    case OutcomeStatus::TimeCapped: return "time_capped";
    case OutcomeStatus::InterruptedUnsafe: return "interrupted_unsafe";
    case OutcomeStatus::MpcFailure: return "mpc_failure";
  }
  return "?";
}

OutcomeStatus outcome_status_from_string(std::string_view s) {
  if (s == "completed") return OutcomeStatus::Completed;
  if (s == "time_capped") return OutcomeStatus::TimeCapped;
  if (s == "interrupted_unsafe") return OutcomeStatus::InterruptedUnsafe;
  if (s == "mpc_failure") return OutcomeStatus::MpcFailure;
  throw ArgumentError("unknown outcome status '" + std::string(s) + "'");
}

double ExperimentOutcome::metric(const std::string& name) const {
  auto it = metrics.find(name);
  if (it == metrics.end()) throw ArgumentError("outcome has no metric '" + name + "'");
  return it->second;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trajectory_csv(const Trajectory& t) {
  t.validate();
  std::string out = "time";
  for (const auto* names : {&t.state_names, &t.input_names, &t.output_names}) {
    for (const auto& n : *names) out += "," + n;
  }
  out += ",solve_time\n";
  for (std::size_t k = 0; k < t.size(); ++k) {
    out += format_number(t.times[k]);
    for (const auto* rows : {&t.states, &t.inputs, &t.outputs}) {
      for (double v : (*rows)[k]) out += "," + format_number(v);
    }
    out += "," + format_number(t.solve_times[k]) + "\n";
  }
  return out;
}

}  // namespace preftune
