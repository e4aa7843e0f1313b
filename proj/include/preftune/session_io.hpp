#pragma once

#include <string>

#include <json.hpp>

#include "preftune/engine.hpp"
#include "preftune/experiment.hpp"

namespace preftune {

using Json = nlohmann::json;

/// Non-finite numbers are written as the strings "inf", "-inf" and "nan".
Json number_to_json(double v);
double number_from_json(const Json& j);

Json to_json(const ParamSpace& space);
ParamSpace param_space_from_json(const Json& j);

Json to_json(const GlispConfig& c);
/// Starts from `base` and applies the keys present in `j`. Unknown keys throw
/// ArgumentError so typos in overrides are not silently ignored.
GlispConfig glisp_config_from_json(const Json& j, const GlispConfig& base = {});

Json to_json(const PreferenceDataset& ds);
PreferenceDataset preference_dataset_from_json(const Json& j);

Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

Json to_json(const ExperimentOutcome& o);
ExperimentOutcome experiment_outcome_from_json(const Json& j);

Json to_json(const SurrogateModel& m);
SurrogateModel surrogate_model_from_json(const Json& j);

Json to_json(const SessionState& s);
SessionState session_state_from_json(const Json& j);

}  // namespace preftune
