#include "preftune/service.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>

#include <httplib.h>

#include "preftune/errors.hpp"

namespace preftune {
namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  for (char c : id) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
  }
  return true;
}

Json sample_event_data(const SessionState& s, std::size_t k) {
  return Json{{"index", k}, {"theta", s.dataset.samples()[k]}};
}

Json candidate_view(const SessionState& s, std::size_t k) {
  const ExperimentOutcome& o = *s.outcomes.at(k);
  const Trajectory& t = o.trajectory;
  Json theta = Json::array();
  for (std::size_t d = 0; d < s.space.dim(); ++d) {
    const ParamSpec& p = s.space[d];
    Json e{{"name", p.name}, {"value", number_to_json(o.applied[d])}};
    if (p.log_scale_label) {
      e["scale"] = *p.log_scale_label;
      if (*p.log_scale_label == "log10") e["display"] = number_to_json(std::pow(10.0, o.applied[d]));
    } else {
      e["display"] = number_to_json(o.applied[d]);
    }
    theta.push_back(std::move(e));
  }
  Json metrics = Json::object();
  for (const auto& [name, v] : o.metrics) metrics[name] = number_to_json(v);

  const std::vector<std::size_t> idx = downsample_indices(t.size());
  auto pick = [&](const std::vector<double>& col) {
    Json a = Json::array();
    for (std::size_t r : idx) a.push_back(number_to_json(col[r]));
    return a;
  };
  Json signals = Json::object();
  signals["time"] = pick(t.times);
  for (const auto* names : {&t.state_names, &t.input_names, &t.output_names}) {
    for (const std::string& n : *names) signals[n] = pick(t.column(n));
  }
  signals["solve_time"] = pick(t.solve_times);
  for (const auto& [name, v] : o.series) signals[name] = pick(v);

  return Json{{"index", k},       {"theta", std::move(theta)},     {"status", std::string(to_string(o.status))},
              {"message", o.message}, {"metrics", std::move(metrics)}, {"num_steps", t.size()},
              {"signals", std::move(signals)}};
}

}  // namespace

std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t max_points) {
  std::vector<std::size_t> out;
  if (n <= max_points) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = i;
    return out;
  }
  if (max_points < 2) return n ? std::vector<std::size_t>{0} : out;
  out.reserve(max_points);
  for (std::size_t k = 0; k < max_points; ++k) {
    out.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(n - 1) /
                                                        static_cast<double>(max_points - 1))));
  }
  return out;
}

Json to_json(const SessionRecord& r) {
  Json events = Json::array();
  for (const SessionEvent& e : r.events) events.push_back(Json{{"type", e.type}, {"time", e.time}, {"data", e.data}});
  return Json{{"version", kSessionFormatVersion},
              {"id", r.id},
              {"scenario", r.scenario},
              {"created", r.created},
              {"updated", r.updated},
              {"events", std::move(events)},
              {"state", to_json(r.state)}};
}

SessionRecord session_record_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("version")) throw ArgumentError("session document has no version");
  if (j.at("version") != kSessionFormatVersion) {
    throw ArgumentError("unsupported session document version " + j.at("version").dump());
  }
  try {
    SessionRecord r{j.at("id").get<std::string>(),      j.at("scenario").get<std::string>(),
                    j.at("created").get<std::string>(), j.at("updated").get<std::string>(),
                    {},                                 session_state_from_json(j.at("state"))};
    for (const Json& e : j.at("events")) {
      r.events.push_back({e.at("type").get<std::string>(), e.at("time").get<std::string>(), e.at("data")});
    }
    return r;
  } catch (const Json::exception& e) {
    throw ArgumentError(std::string("malformed session document: ") + e.what());
  }
}

Json query_view(const SessionRecord& r) {
  const SessionState& s = r.state;
  Json v{{"session_id", r.id},
         {"scenario", r.scenario},
         {"phase", std::string(to_string(s.phase))},
         {"progress", Json{{"n", s.num_samples()}, {"n_max", s.config.n_max}}},
         {"num_preferences", s.dataset.num_prefs()},
         {"incumbent", s.incumbent},
         {"notes", s.notes}};
  if (s.pending_query) {
    v["pending"] = Json{{"left", candidate_view(s, s.pending_query->first)},
                        {"right", candidate_view(s, s.pending_query->second)}};
    v["result"] = nullptr;
  } else {
    Json prefs = Json::array();
    for (const PreferenceRecord& p : s.dataset.prefs()) prefs.push_back(Json{p.i, p.j, to_int(p.b)});
    v["pending"] = nullptr;
    v["result"] = Json{{"incumbent", candidate_view(s, s.incumbent)},
                       {"samples", s.dataset.samples()},
                       {"preferences", std::move(prefs)},
                       {"history", "/sessions/" + r.id + "/export?format=session-file"}};
  }
  return v;
}

Service::Service(std::filesystem::path data_dir, ScenarioFactory factory)
    : dir_(std::move(data_dir)), factory_(std::move(factory)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path Service::path_of(const std::string& id) const { return dir_ / (id + ".json"); }

std::string Service::new_id() {
  static thread_local std::mt19937_64 gen{std::random_device{}()};
  for (;;) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(gen()));
    std::string id(buf);
    if (!sessions_.count(id) && !std::filesystem::exists(path_of(id))) return id;
  }
}

void Service::persist(const SessionRecord& r) const {
  const std::filesystem::path final_path = path_of(r.id);
  std::filesystem::path tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << to_json(r).dump(2) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

std::shared_ptr<Service::Entry> Service::entry(const std::string& id) {
  if (!valid_id(id)) throw ServiceError(404, "unknown session '" + id + "'");
  std::lock_guard lock(sessions_mtx_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;

  const std::filesystem::path p = path_of(id);
  if (!std::filesystem::exists(p)) throw ServiceError(404, "unknown session '" + id + "'");
  std::ifstream in(p, std::ios::binary);
  std::optional<SessionRecord> rec;
  try {
    rec.emplace(session_record_from_json(Json::parse(in)));
  } catch (const std::exception& e) {
    throw ServiceError(500, "cannot load session '" + id + "': " + e.what());
  }
  auto e = std::make_shared<Entry>();
  try {
    e->binding = std::make_shared<const ScenarioBinding>(factory_(rec->scenario));
  } catch (const ArgumentError& ex) {
    throw ServiceError(500, "session '" + id + "' uses an unavailable scenario: " + ex.what());
  }
  e->record = std::make_shared<const SessionRecord>(std::move(*rec));
  sessions_.emplace(id, e);
  return e;
}

std::shared_ptr<const SessionRecord> Service::snapshot(Entry& e) {
  std::lock_guard lock(e.snapshot);
  return e.record;
}

Json Service::create_session(const std::string& scenario, const Json& overrides) {
  std::shared_ptr<const ScenarioBinding> binding;
  try {
    binding = std::make_shared<const ScenarioBinding>(factory_(scenario));
  } catch (const ArgumentError& e) {
    throw ServiceError(404, e.what());
  }
  GlispConfig cfg;
  try {
    cfg = glisp_config_from_json(overrides.is_null() ? Json::object() : overrides);
  } catch (const ArgumentError& e) {
    throw ServiceError(400, e.what());
  }

  const std::string now = utc_now();
  SessionRecord rec{{}, scenario, now, now, {}, init_session(binding->space, cfg)};
  run_pending_experiments(rec.state, binding->runner);
  for (std::size_t k = 0; k < rec.state.num_samples(); ++k) {
    rec.events.push_back({"sample", rec.created, sample_event_data(rec.state, k)});
  }

  auto e = std::make_shared<Entry>();
  e->binding = binding;
  {
    std::lock_guard lock(sessions_mtx_);
    rec.id = new_id();
    persist(rec);
    e->record = std::make_shared<const SessionRecord>(std::move(rec));
    sessions_.emplace(e->record->id, e);
  }
  Json out = query_view(*e->record);
  out["created"] = e->record->created;
  return out;
}

Json Service::get_query(const std::string& id) { return query_view(*snapshot(*entry(id))); }

Json Service::post_preference(const std::string& id, const Json& body) {
  const std::shared_ptr<Entry> e = entry(id);
  std::unique_lock actor(e->actor, std::try_to_lock);
  if (!actor.owns_lock()) throw ServiceError(409, "session '" + id + "' is busy with another request");

  if (!body.is_object() || !body.contains("b")) throw ServiceError(400, "body must be an object with field 'b'");
  const Json& bj = body.at("b");
  if (!bj.is_number_integer()) throw ServiceError(400, "b must be -1, 0 or 1");
  Preference b;
  try {
    b = preference_from_int(bj.get<long long>());
  } catch (const ArgumentError& ex) {
    throw ServiceError(400, ex.what());
  }

  SessionRecord rec = *snapshot(*e);
  SessionState& s = rec.state;
  if (!s.pending_query) throw ServiceError(409, "session '" + id + "' has no pending query");
  if (body.contains("pair")) {
    const Json& p = body.at("pair");
    auto index_like = [](const Json& v) { return v.is_number_integer() && v.get<long long>() >= 0; };
    if (!p.is_array() || p.size() != 2 || !index_like(p[0]) || !index_like(p[1])) {
      throw ServiceError(400, "pair must be [i, j]");
    }
    if (QueryPair{p[0].get<std::size_t>(), p[1].get<std::size_t>()} != *s.pending_query) {
      throw ServiceError(409, "pair does not match the pending query");
    }
  }

  const auto [i, j] = *s.pending_query;
  const std::size_t before = s.num_samples();
  submit_preference(s, b);
  run_pending_experiments(s, e->binding->runner);
  rec.updated = utc_now();
  rec.events.push_back({"preference", rec.updated, Json{{"i", i}, {"j", j}, {"b", to_int(b)}}});
  for (std::size_t k = before; k < s.num_samples(); ++k) {
    rec.events.push_back({"sample", rec.updated, sample_event_data(s, k)});
  }
  persist(rec);
  auto published = std::make_shared<const SessionRecord>(std::move(rec));
  {
    std::lock_guard lock(e->snapshot);
    e->record = published;
  }
  return query_view(*published);
}

ExportDocument Service::export_session(const std::string& id, const std::string& format) {
  if (format != "csv" && format != "session-file") {
    throw ServiceError(400, "unknown export format '" + format + "' (expected csv or session-file)");
  }
  const auto rec = snapshot(*entry(id));
  if (format == "session-file") return {"application/json", to_json(*rec).dump(2) + "\n"};
  Json files = Json::object();
  for (std::size_t k = 0; k < rec->state.outcomes.size(); ++k) {
    if (!rec->state.outcomes[k]) continue;
    char name[32];
    std::snprintf(name, sizeof name, "experiment_%03zu.csv", k);
    files[name] = trajectory_csv(rec->state.outcomes[k]->trajectory);
  }
  return {"application/json", files.dump(2) + "\n"};
}

Json Service::list_sessions() {
  Json out = Json::array();
  std::vector<std::string> ids;
  for (const auto& f : std::filesystem::directory_iterator(dir_)) {
    if (f.path().extension() == ".json") ids.push_back(f.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const std::string& id : ids) {
    try {
      const auto rec = snapshot(*entry(id));
      out.push_back(Json{{"id", id},
                         {"scenario", rec->scenario},
                         {"phase", std::string(to_string(rec->state.phase))},
                         {"n", rec->state.num_samples()},
                         {"n_max", rec->state.config.n_max},
                         {"updated", rec->updated}});
    } catch (const ServiceError&) {
      // unreadable documents are skipped from the listing
    }
  }
  return out;
}

void register_routes(httplib::Server& server, Service& service) {
  auto reply = [](httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  auto guarded = [reply](auto&& fn) {
    return [fn, reply](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const ServiceError& e) {
        reply(res, e.status(), Json{{"error", e.what()}});
      } catch (const Json::parse_error& e) {
        reply(res, 400, Json{{"error", std::string("invalid JSON body: ") + e.what()}});
      } catch (const std::exception& e) {
        reply(res, 500, Json{{"error", e.what()}});
      }
    };
  };
  auto parse_body = [](const httplib::Request& req) {
    return req.body.empty() ? Json::object() : Json::parse(req.body);
  };

  server.Get("/healthz", guarded([reply](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, Json{{"status", "ok"}, {"session_format_version", kSessionFormatVersion}});
             }));
  server.Get("/sessions", guarded([reply, &service](const httplib::Request&, httplib::Response& res) {
               reply(res, 200, service.list_sessions());
             }));
  server.Post("/sessions", guarded([reply, parse_body, &service](const httplib::Request& req, httplib::Response& res) {
                const Json body = parse_body(req);
                if (!body.is_object() || !body.contains("scenario") || !body.at("scenario").is_string()) {
                  throw ServiceError(400, "body must be an object with a string field 'scenario'");
                }
                reply(res, 201,
                      service.create_session(body.at("scenario").get<std::string>(),
                                             body.contains("config") ? body.at("config") : Json::object()));
              }));
  server.Get("/sessions/:id/query", guarded([reply, &service](const httplib::Request& req, httplib::Response& res) {
               reply(res, 200, service.get_query(req.path_params.at("id")));
             }));
  server.Post("/sessions/:id/preference",
              guarded([reply, parse_body, &service](const httplib::Request& req, httplib::Response& res) {
                reply(res, 200, service.post_preference(req.path_params.at("id"), parse_body(req)));
              }));
  server.Get("/sessions/:id/export", guarded([&service](const httplib::Request& req, httplib::Response& res) {
               const std::string format = req.has_param("format") ? req.get_param_value("format") : "";
               const ExportDocument doc = service.export_session(req.path_params.at("id"), format);
               res.status = 200;
               res.set_content(doc.body, doc.content_type);
             }));
}

ServeOptions serve_options_from_env() {
  ServeOptions o;
  if (const char* port = std::getenv("PREF_TUNE_PORT"); port && *port) {
    char* end = nullptr;
    const long v = std::strtol(port, &end, 10);
    if (*end != '\0' || v < 0 || v > 65535) throw ArgumentError(std::string("bad PREF_TUNE_PORT '") + port + "'");
    o.port = static_cast<int>(v);
  }
  if (const char* dir = std::getenv("PREF_TUNE_DATA"); dir && *dir) o.data_dir = dir;
  return o;
}

bool serve(const ServeOptions& opts) {
  Service service(opts.data_dir);
  httplib::Server server;
  server.set_read_timeout(opts.request_timeout_s, 0);
  server.set_write_timeout(opts.request_timeout_s, 0);
  register_routes(server, service);
  return server.listen(opts.host, opts.port);
}

}  // namespace preftune
