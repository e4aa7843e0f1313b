#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "preftune/errors.hpp"
#include "preftune/service.hpp"
#include "preftune/session_io.hpp"

// After Eigen: resolv.h, pulled in by httplib, defines a _res macro.
#include <httplib.h>

using namespace preftune;
namespace fs = std::filesystem;

namespace {

// Fresh directory per test, removed afterwards.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("preftune_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

Json small_config(std::size_t n_init = 3, std::size_t n_max = 6) {
  return Json{{"n_init", n_init}, {"n_max", n_max}, {"swarm_size", 10}, {"pso_iters", 20}, {"seed", 5}};
}

// Answers the pending query from the benchmark values shown in the view.
int answer(const Json& view) {
  const double l = view["pending"]["left"]["metrics"]["value"].get<double>();
  const double r = view["pending"]["right"]["metrics"]["value"].get<double>();
  return to_int(preference_from_values(l, r));
}

Json pref_body(const Json& view) {
  return Json{{"b", answer(view)},
              {"pair", {view["pending"]["left"]["index"], view["pending"]["right"]["index"]}}};
}

int status_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 200;
}

}  // namespace

TEST(SessionIo, NonFiniteNumbers) {
  EXPECT_EQ(number_to_json(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(number_to_json(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(number_to_json(std::nan("")), "nan");
  EXPECT_TRUE(std::isinf(number_from_json(Json("-inf"))));
  EXPECT_TRUE(std::isnan(number_from_json(Json("nan"))));
  EXPECT_EQ(number_from_json(Json(1.5)), 1.5);
  EXPECT_THROW(number_from_json(Json("huge")), ArgumentError);
}

TEST(SessionIo, ConfigOverrides) {
  const GlispConfig c = glisp_config_from_json(Json{{"n_init", 4}, {"n_max", 9}, {"kind", "gaussian"}, {"delta", 1.0}});
  EXPECT_EQ(c.n_init, 4u);
  EXPECT_EQ(c.n_max, 9u);
  EXPECT_EQ(c.kind, RbfKind::Gaussian);
  EXPECT_EQ(c.delta, 1.0);
  EXPECT_EQ(glisp_config_from_json(to_json(c)).n_max, 9u);
  EXPECT_EQ(to_json(glisp_config_from_json(to_json(c))), to_json(c));
  EXPECT_THROW(glisp_config_from_json(Json{{"n_inti", 4}}), ArgumentError);
  EXPECT_THROW(glisp_config_from_json(Json{{"n_init", "four"}}), ArgumentError);
  EXPECT_THROW(glisp_config_from_json(Json{{"n_init", 1}}), ArgumentError);
  EXPECT_THROW(glisp_config_from_json(Json{{"n_init", -3}}), ArgumentError);
}

TEST(SessionIo, StateRoundTrip) {
  const ScenarioBinding b = make_scenario("bench:two_well");
  SessionState s = init_session(b.space, glisp_config_from_json(small_config(3, 8)));
  run_pending_experiments(s, b.runner);
  while (s.pending_query && s.num_samples() < 6) {
    const auto [i, j] = *s.pending_query;
    submit_preference(s, preference_from_values(b.oracle(*s.outcomes[i]), b.oracle(*s.outcomes[j])));
    run_pending_experiments(s, b.runner);
  }
  ASSERT_TRUE(s.model.has_value());
  const Json j = to_json(s);
  const SessionState back = session_state_from_json(Json::parse(j.dump()));
  EXPECT_EQ(to_json(back), j);
  EXPECT_EQ(back.dataset.samples(), s.dataset.samples());
  EXPECT_EQ(back.pending_query, s.pending_query);
  EXPECT_EQ(back.incumbent, s.incumbent);
  const Vec x = Vec::Constant(2, 0.1);
  EXPECT_EQ((*back.model)(x), (*s.model)(x));
  Json bad = j;
  bad["pending_query"] = {0, 99};
  EXPECT_THROW(session_state_from_json(bad), ArgumentError);
}

TEST(SessionIo, OutcomeRoundTrip) {
  const ExperimentOutcome o = run_cstr_experiment({0.31, 26.0, -1.79});
  const ExperimentOutcome back = experiment_outcome_from_json(Json::parse(to_json(o).dump()));
  EXPECT_EQ(back.trajectory.states, o.trajectory.states);
  EXPECT_EQ(back.trajectory.solve_times, o.trajectory.solve_times);
  EXPECT_EQ(back.metrics, o.metrics);
  EXPECT_EQ(back.status, o.status);
  EXPECT_EQ(trajectory_csv(back.trajectory), trajectory_csv(o.trajectory));
}

TEST(SessionRecord, VersionIsChecked) {
  const ScenarioBinding b = make_scenario("bench:sphere");
  SessionRecord r{"abc", "bench:sphere", "t0", "t1", {{"sample", "t0", Json{{"index", 0}}}},
                  init_session(b.space, GlispConfig{})};
  Json j = to_json(r);
  EXPECT_EQ(j["version"], kSessionFormatVersion);
  const SessionRecord back = session_record_from_json(j);
  EXPECT_EQ(to_json(back), j);
  j["version"] = kSessionFormatVersion + 1;
  EXPECT_THROW(session_record_from_json(j), ArgumentError);
}

TEST(Downsample, Indices) {
  EXPECT_EQ(downsample_indices(3), (std::vector<std::size_t>{0, 1, 2}));
  const auto d = downsample_indices(10001, 2000);
  EXPECT_EQ(d.size(), 2000u);
  EXPECT_EQ(d.front(), 0u);
  EXPECT_EQ(d.back(), 10000u);
  EXPECT_TRUE(std::is_sorted(d.begin(), d.end()));
  EXPECT_EQ(std::adjacent_find(d.begin(), d.end()), d.end());
}

TEST(Service, CreateWithDefaults) {
  TempDir dir;
  Service svc(dir.path());
  const Json v = svc.create_session("cstr", Json::object());
  const std::string id = v["session_id"];
  EXPECT_EQ(v["scenario"], "cstr");
  EXPECT_EQ(v["progress"]["n"], 2);
  EXPECT_EQ(v["progress"]["n_max"], 50);
  EXPECT_NE(v["pending"]["left"]["theta"], v["pending"]["right"]["theta"]);
  EXPECT_EQ(v["pending"]["left"]["index"], 0);
  EXPECT_EQ(v["pending"]["right"]["index"], 1);
  EXPECT_TRUE(v["result"].is_null());
  const Json& theta = v["pending"]["left"]["theta"];
  ASSERT_EQ(theta.size(), 3u);
  EXPECT_EQ(theta[2]["scale"], "log10");
  EXPECT_NEAR(theta[2]["display"].get<double>(), std::pow(10.0, theta[2]["value"].get<double>()), 1e-12);
  const Json& sig = v["pending"]["left"]["signals"];
  for (const char* name : {"time", "T", "CA", "Tc", "solve_time"}) {
    ASSERT_TRUE(sig.contains(name)) << name;
    EXPECT_EQ(sig[name].size(), sig["time"].size());
    EXPECT_LE(sig[name].size(), 2000u);
  }
  EXPECT_TRUE(fs::exists(dir.path() / (id + ".json")));
  EXPECT_NE(svc.create_session("cstr", Json::object())["session_id"], id);
  EXPECT_EQ(svc.list_sessions().size(), 2u);
}

TEST(Service, CreateErrors) {
  TempDir dir;
  Service svc(dir.path());
  EXPECT_EQ(status_of([&] { svc.create_session("bench:sphere", Json{{"n_init", 1}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.create_session("bench:sphere", Json{{"bogus", 1}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.create_session("reactor", Json::object()); }), 404);
  EXPECT_EQ(status_of([&] { svc.get_query("missing"); }), 404);
  EXPECT_EQ(status_of([&] { svc.get_query("../etc"); }), 404);
}

TEST(Service, PreferenceLoopToFinish) {
  TempDir dir;
  Service svc(dir.path());
  Json v = svc.create_session("bench:sphere", small_config(3, 6));
  const std::string id = v["session_id"];
  EXPECT_EQ(svc.get_query(id), svc.get_query(id));
  EXPECT_EQ(status_of([&] { svc.post_preference(id, Json{{"b", 2}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.post_preference(id, Json{{"b", "left"}}); }), 400);
  EXPECT_EQ(status_of([&] { svc.post_preference(id, Json{{"b", 0}, {"pair", {5, 0}}}); }), 409);
  std::size_t posts = 0;
  while (!v["pending"].is_null()) {
    v = svc.post_preference(id, pref_body(v));
    ++posts;
    EXPECT_EQ(v["num_preferences"], posts);
  }
  EXPECT_EQ(posts, 5u);
  EXPECT_EQ(v["phase"], "finished");
  EXPECT_EQ(v["progress"]["n"], 6);
  EXPECT_EQ(v["result"]["samples"].size(), 6u);
  EXPECT_EQ(v["result"]["preferences"].size(), 5u);
  EXPECT_EQ(v["result"]["incumbent"]["index"], v["incumbent"]);
  EXPECT_EQ(status_of([&] { svc.post_preference(id, Json{{"b", 0}}); }), 409);

  const ExportDocument csv = svc.export_session(id, "csv");
  const Json files = Json::parse(csv.body);
  EXPECT_EQ(files.size(), 6u);
  EXPECT_TRUE(files.contains("experiment_005.csv"));
  EXPECT_EQ(status_of([&] { svc.export_session(id, "xml"); }), 400);

  const ExportDocument doc = svc.export_session(id, "session-file");
  const SessionRecord rec = session_record_from_json(Json::parse(doc.body));
  EXPECT_EQ(query_view(rec), svc.get_query(id));
  std::size_t prefs = 0, samples = 0;
  for (const auto& e : rec.events) (e.type == "preference" ? prefs : samples) += 1;
  EXPECT_EQ(prefs, 5u);
  EXPECT_EQ(samples, 6u);
}

TEST(Service, RestartRecoversThePendingQuery) {
  TempDir dir;
  std::string id;
  Json before;
  {
    Service svc(dir.path());
    Json v = svc.create_session("bench:sin_quad", small_config(3, 8));
    id = v["session_id"];
    for (int k = 0; k < 3; ++k) v = svc.post_preference(id, pref_body(v));
    before = svc.get_query(id);
  }
  EXPECT_FALSE(fs::exists(dir.path() / (id + ".json.tmp")));
  Service again(dir.path());
  const Json after = again.get_query(id);
  EXPECT_EQ(after, before);
  // The restarted service continues the same session to the end.
  Json v = after;
  while (!v["pending"].is_null()) v = again.post_preference(id, pref_body(v));
  EXPECT_EQ(v["progress"]["n"], 8);
}

TEST(Service, CorruptDocumentIsAServerError) {
  TempDir dir;
  {
    std::ofstream(dir.path() / "broken.json") << "{not json";
  }
  Service svc(dir.path());
  EXPECT_EQ(status_of([&] { svc.get_query("broken"); }), 500);
  EXPECT_TRUE(svc.list_sessions().empty());
}

TEST(Service, ConcurrentPostsOnOneSession) {
  TempDir dir;
  auto slow = [](std::string_view kind) {
    ScenarioBinding b = make_scenario(kind);
    auto inner = b.runner;
    b.runner = [inner](const ParamVector& th) {
      std::this_thread::sleep_for(std::chrono::milliseconds(300));
      return inner(th);
    };
    return b;
  };
  Service svc(dir.path(), slow);
  const Json v = svc.create_session("bench:sphere", small_config(3, 6));
  const std::string id = v["session_id"];
  const Json body = pref_body(v);
  std::atomic<int> ok{0}, conflict{0};
  auto post = [&] {
    const int s = status_of([&] { svc.post_preference(id, body); });
    (s == 200 ? ok : conflict)++;
    if (s != 200) EXPECT_EQ(s, 409);
  };
  std::thread a(post), b(post);
  a.join();
  b.join();
  EXPECT_EQ(ok.load(), 1);
  EXPECT_EQ(conflict.load(), 1);
  EXPECT_EQ(svc.get_query(id)["num_preferences"], 1);
}

TEST(Service, ReadsDoNotWaitForAMutation) {
  TempDir dir;
  std::atomic<bool> slow_mode{false};
  auto factory = [&](std::string_view kind) {
    ScenarioBinding b = make_scenario(kind);
    auto inner = b.runner;
    b.runner = [inner, &slow_mode](const ParamVector& th) {
      if (slow_mode) std::this_thread::sleep_for(std::chrono::milliseconds(800));
      return inner(th);
    };
    return b;
  };
  Service svc(dir.path(), factory);
  const Json v = svc.create_session("bench:sphere", small_config(3, 6));
  const std::string id = v["session_id"];
  slow_mode = true;
  std::thread writer([&] { svc.post_preference(id, pref_body(v)); });
  std::this_thread::sleep_for(std::chrono::milliseconds(100));
  const auto t0 = std::chrono::steady_clock::now();
  const Json during = svc.get_query(id);
  const double waited = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  writer.join();
  EXPECT_LT(waited, 0.5);
  EXPECT_EQ(during["num_preferences"], 0);
  EXPECT_EQ(svc.get_query(id)["num_preferences"], 1);
}

TEST(Http, EndToEnd) {
  TempDir dir;
  Service svc(dir.path());
  httplib::Server server;
  register_routes(server, svc);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(60, 0);
  auto health = cli.Get("/healthz");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);

  auto bad = cli.Post("/sessions", "{oops", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(Json::parse(bad->body).contains("error"));
  auto unknown = cli.Post("/sessions", R"({"scenario": "nope"})", "application/json");
  ASSERT_TRUE(unknown);
  EXPECT_EQ(unknown->status, 404);

  const Json create{{"scenario", "bench:sphere"}, {"config", small_config(3, 5)}};
  auto created = cli.Post("/sessions", create.dump(), "application/json");
  ASSERT_TRUE(created);
  ASSERT_EQ(created->status, 201) << created->body;
  Json v = Json::parse(created->body);
  const std::string id = v["session_id"];

  auto q = cli.Get("/sessions/" + id + "/query");
  ASSERT_TRUE(q);
  EXPECT_EQ(q->status, 200);
  EXPECT_EQ(Json::parse(q->body)["pending"], v["pending"]);
  auto missing = cli.Get("/sessions/zzz/query");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  auto invalid = cli.Post("/sessions/" + id + "/preference", R"({"b": 7})", "application/json");
  ASSERT_TRUE(invalid);
  EXPECT_EQ(invalid->status, 400);
  while (!v["pending"].is_null()) {
    auto r = cli.Post("/sessions/" + id + "/preference", pref_body(v).dump(), "application/json");
    ASSERT_TRUE(r);
    ASSERT_EQ(r->status, 200) << r->body;
    v = Json::parse(r->body);
  }
  auto done = cli.Post("/sessions/" + id + "/preference", R"({"b": 0})", "application/json");
  ASSERT_TRUE(done);
  EXPECT_EQ(done->status, 409);

  auto csv = cli.Get("/sessions/" + id + "/export?format=csv");
  ASSERT_TRUE(csv);
  EXPECT_EQ(csv->status, 200);
  EXPECT_EQ(Json::parse(csv->body).size(), 5u);
  auto file = cli.Get("/sessions/" + id + "/export?format=session-file");
  ASSERT_TRUE(file);
  EXPECT_EQ(Json::parse(file->body)["id"], id);
  auto nofmt = cli.Get("/sessions/" + id + "/export");
  ASSERT_TRUE(nofmt);
  EXPECT_EQ(nofmt->status, 400);
  auto list = cli.Get("/sessions");
  ASSERT_TRUE(list);
  EXPECT_EQ(Json::parse(list->body).size(), 1u);

  server.stop();
  th.join();
}

TEST(Serve, OptionsFromEnvironment) {
  ::setenv("PREF_TUNE_PORT", "9123", 1);
  ::setenv("PREF_TUNE_DATA", "/tmp/pt", 1);
  ServeOptions o = serve_options_from_env();
  EXPECT_EQ(o.port, 9123);
  EXPECT_EQ(o.data_dir, fs::path("/tmp/pt"));
  ::setenv("PREF_TUNE_PORT", "http", 1);
  EXPECT_THROW(serve_options_from_env(), ArgumentError);
  ::unsetenv("PREF_TUNE_PORT");
  ::unsetenv("PREF_TUNE_DATA");
  o = serve_options_from_env();
  EXPECT_EQ(o.port, 8080);
}
