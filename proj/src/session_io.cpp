#include "preftune/session_io.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "preftune/errors.hpp"

namespace preftune {
namespace {

template <typename T>
T get(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ArgumentError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("bad field '") + key + "': " + e.what());
  }
}

double get_num(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ArgumentError(std::string("missing field '") + key + "'");
  return number_from_json(j.at(key));
}

Json numbers(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(number_to_json(x));
  return a;
}

std::vector<double> numbers_from(const Json& j) {
  if (!j.is_array()) throw ArgumentError("expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const Json& x : j) out.push_back(number_from_json(x));
  return out;
}

Json rows(const std::vector<std::vector<double>>& r) {
  Json a = Json::array();
  for (const auto& row : r) a.push_back(numbers(row));
  return a;
}

std::vector<std::vector<double>> rows_from(const Json& j) {
  if (!j.is_array()) throw ArgumentError("expected an array of rows");
  std::vector<std::vector<double>> out;
  out.reserve(j.size());
  for (const Json& row : j) out.push_back(numbers_from(row));
  return out;
}

Json vec(const Vec& v) { return numbers(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))); }

Vec vec_from(const Json& j) {
  const std::vector<double> v = numbers_from(j);
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Json number_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number_from_json(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ArgumentError("expected a number, got " + j.dump());
}

Json to_json(const ParamSpace& space) {
  Json a = Json::array();
  for (const ParamSpec& p : space.specs()) {
    Json o{{"name", p.name}, {"lower", p.lower}, {"upper", p.upper}, {"integer", p.integer}};
    if (p.log_scale_label) o["log_scale_label"] = *p.log_scale_label;
    a.push_back(std::move(o));
  }
  return a;
}

ParamSpace param_space_from_json(const Json& j) {
  if (!j.is_array()) throw ArgumentError("space must be an array");
  std::vector<ParamSpec> specs;
  for (const Json& o : j) {
    ParamSpec p{get<std::string>(o, "name"), get_num(o, "lower"), get_num(o, "upper"), get<bool>(o, "integer"),
                std::nullopt};
    if (o.contains("log_scale_label")) p.log_scale_label = get<std::string>(o, "log_scale_label");
    specs.push_back(std::move(p));
  }
  return ParamSpace(std::move(specs));
}

Json to_json(const GlispConfig& c) {
  return Json{{"n_init", c.n_init},
              {"n_max", c.n_max},
              {"delta", c.delta},
              {"sigma", c.sigma},
              {"shape_init", c.shape_init},
              {"cv_schedule", c.cv_schedule},
              {"cv_folds", c.cv_folds},
              {"kind", std::string(to_string(c.kind))},
              {"lambda", c.fit.lambda},
              {"swarm_size", c.pso.swarm_size},
              {"pso_iters", c.pso.max_iters},
              {"seed", c.seed}};
}

GlispConfig glisp_config_from_json(const Json& j, const GlispConfig& base) {
  if (!j.is_object()) throw ArgumentError("config must be an object");
  static const std::set<std::string> known{"n_init", "n_max",  "delta",      "sigma",     "shape_init", "cv_schedule",
                                           "cv_folds", "kind", "lambda", "swarm_size", "pso_iters", "seed"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ArgumentError("unknown config field '" + k + "'");
  }
  auto count = [&](const char* key) {
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ArgumentError(std::string("config field '") + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
  };
  auto real = [&](const char* key) {
    if (!j.at(key).is_number()) throw ArgumentError(std::string("config field '") + key + "' must be a number");
    return j.at(key).get<double>();
  };
  GlispConfig c = base;
  if (j.contains("n_init")) c.n_init = count("n_init");
  if (j.contains("n_max")) c.n_max = count("n_max");
  if (j.contains("cv_folds")) c.cv_folds = count("cv_folds");
  if (j.contains("swarm_size")) c.pso.swarm_size = count("swarm_size");
  if (j.contains("pso_iters")) c.pso.max_iters = count("pso_iters");
  if (j.contains("seed")) {
    const Json& v = j.at("seed");
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ArgumentError("config field 'seed' must be a non-negative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("delta")) c.delta = real("delta");
  if (j.contains("sigma")) c.sigma = real("sigma");
  if (j.contains("shape_init")) c.shape_init = real("shape_init");
  if (j.contains("lambda")) c.fit.lambda = real("lambda");
  if (j.contains("kind")) c.kind = rbf_kind_from_string(get<std::string>(j, "kind"));
  if (j.contains("cv_schedule")) {
    const Json& s = j.at("cv_schedule");
    if (!s.is_array()) throw ArgumentError("config field 'cv_schedule' must be an array");
    c.cv_schedule.clear();
    for (const Json& v : s) {
      if (!v.is_number_unsigned()) throw ArgumentError("cv_schedule entries must be non-negative integers");
      c.cv_schedule.push_back(v.get<std::size_t>());
    }
  }
  c.validate();
  return c;
}

Json to_json(const PreferenceDataset& ds) {
  Json prefs = Json::array();
  for (const PreferenceRecord& p : ds.prefs()) prefs.push_back(Json{p.i, p.j, to_int(p.b)});
  return Json{{"samples", rows(ds.samples())}, {"prefs", std::move(prefs)}};
}

PreferenceDataset preference_dataset_from_json(const Json& j) {
  PreferenceDataset ds;
  for (auto& s : rows_from(j.at("samples"))) ds.add_sample(std::move(s));
  for (const Json& p : j.at("prefs")) {
    if (!p.is_array() || p.size() != 3) throw ArgumentError("preference entries are [i, j, b]");
    ds.add_preference(p[0].get<std::size_t>(), p[1].get<std::size_t>(), preference_from_int(p[2].get<long long>()));
  }
  return ds;
}

Json to_json(const Trajectory& t) {
  return Json{{"state_names", t.state_names}, {"input_names", t.input_names}, {"output_names", t.output_names},
              {"times", numbers(t.times)},    {"states", rows(t.states)},       {"inputs", rows(t.inputs)},
              {"outputs", rows(t.outputs)},   {"solve_times", numbers(t.solve_times)}};
}

Trajectory trajectory_from_json(const Json& j) {
  Trajectory t;
  t.state_names = get<std::vector<std::string>>(j, "state_names");
  t.input_names = get<std::vector<std::string>>(j, "input_names");
  t.output_names = get<std::vector<std::string>>(j, "output_names");
  t.times = numbers_from(j.at("times"));
  t.states = rows_from(j.at("states"));
  t.inputs = rows_from(j.at("inputs"));
  t.outputs = rows_from(j.at("outputs"));
  t.solve_times = numbers_from(j.at("solve_times"));
  t.validate();
  return t;
}

Json to_json(const ExperimentOutcome& o) {
  Json metrics = Json::object();
  for (const auto& [k, v] : o.metrics) metrics[k] = number_to_json(v);
  Json series = Json::object();
  for (const auto& [k, v] : o.series) series[k] = numbers(v);
  return Json{{"theta", numbers(o.theta)},
              {"applied", numbers(o.applied)},
              {"status", std::string(to_string(o.status))},
              {"metrics", std::move(metrics)},
              {"series", std::move(series)},
              {"message", o.message},
              {"trajectory", to_json(o.trajectory)}};
}

ExperimentOutcome experiment_outcome_from_json(const Json& j) {
  ExperimentOutcome o;
  o.theta = numbers_from(j.at("theta"));
  o.applied = numbers_from(j.at("applied"));
  o.status = outcome_status_from_string(get<std::string>(j, "status"));
  for (const auto& [k, v] : j.at("metrics").items()) o.metrics[k] = number_from_json(v);
  for (const auto& [k, v] : j.at("series").items()) o.series[k] = numbers_from(v);
  o.message = get<std::string>(j, "message");
  o.trajectory = trajectory_from_json(j.at("trajectory"));
  return o;
}

Json to_json(const SurrogateModel& m) {
  return Json{{"kind", std::string(to_string(m.kind()))},
              {"shape", m.shape()},
              {"sigma", m.sigma()},
              {"centers", [&] {
                 Json a = Json::array();
                 for (const Vec& c : m.centers()) a.push_back(vec(c));
                 return a;
               }()},
              {"coeffs", vec(m.coeffs())}};
}

SurrogateModel surrogate_model_from_json(const Json& j) {
  std::vector<Vec> centers;
  for (const Json& c : j.at("centers")) centers.push_back(vec_from(c));
  return SurrogateModel(rbf_kind_from_string(get<std::string>(j, "kind")), get_num(j, "shape"), std::move(centers),
                        vec_from(j.at("coeffs")), get_num(j, "sigma"));
}

Json to_json(const SessionState& s) {
  Json outcomes = Json::array();
  for (const auto& o : s.outcomes) outcomes.push_back(o ? to_json(*o) : Json(nullptr));
  Json pending = s.pending_query ? Json{s.pending_query->first, s.pending_query->second} : Json(nullptr);
  return Json{{"space", to_json(s.space)},
              {"config", to_json(s.config)},
              {"dataset", to_json(s.dataset)},
              {"outcomes", std::move(outcomes)},
              {"model", s.model ? to_json(*s.model) : Json(nullptr)},
              {"shape", s.shape},
              {"incumbent", s.incumbent},
              {"phase", std::string(to_string(s.phase))},
              {"pending_query", std::move(pending)},
              {"initial_design", rows(s.initial_design)},
              {"notes", s.notes}};
}

SessionState session_state_from_json(const Json& j) {
  SessionState s{param_space_from_json(j.at("space")),
                 glisp_config_from_json(j.at("config")),
                 preference_dataset_from_json(j.at("dataset")),
                 {},
                 std::nullopt,
                 get_num(j, "shape"),
                 get<std::size_t>(j, "incumbent"),
                 phase_from_string(get<std::string>(j, "phase")),
                 std::nullopt,
                 rows_from(j.at("initial_design")),
                 get<std::vector<std::string>>(j, "notes")};
  for (const Json& o : j.at("outcomes")) {
    s.outcomes.push_back(o.is_null() ? std::nullopt : std::optional(experiment_outcome_from_json(o)));
  }
  if (!j.at("model").is_null()) s.model = surrogate_model_from_json(j.at("model"));
  const Json& p = j.at("pending_query");
  if (!p.is_null()) {
    if (!p.is_array() || p.size() != 2) throw ArgumentError("pending_query must be [i, j]");
    s.pending_query = QueryPair{p[0].get<std::size_t>(), p[1].get<std::size_t>()};
  }
  if (s.outcomes.size() > s.dataset.size() || s.incumbent >= std::max<std::size_t>(s.dataset.size(), 1) ||
      (s.pending_query && std::max(s.pending_query->first, s.pending_query->second) >= s.dataset.size())) {
    throw ArgumentError("session document indices are inconsistent");
  }
  return s;
}

}  // namespace preftune
