#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "preftune/engine.hpp"
#include "preftune/scenarios.hpp"
#include "preftune/session_io.hpp"

namespace httplib {
class Server;
}

namespace preftune {

inline constexpr int kSessionFormatVersion = 1;

/// Carries the HTTP status the error maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct SessionEvent {
  std::string type;  // "sample" or "preference"
  std::string time;  // UTC, ISO 8601
  Json data;
};

struct SessionRecord {
  std::string id;
  std::string scenario;
  std::string created;
  std::string updated;
  std::vector<SessionEvent> events;
  SessionState state;
};

Json to_json(const SessionRecord& r);
/// Throws ArgumentError on a malformed document or an unknown version.
SessionRecord session_record_from_json(const Json& j);

/// All of 0..n-1 when n <= max_points, else max_points evenly spaced indices
/// including both ends.
std::vector<std::size_t> downsample_indices(std::size_t n, std::size_t max_points = 2000);

struct ExportDocument {
  std::string content_type;
  std::string body;  // CSV exports: JSON object {file name: CSV text}
};

/// Session store and request handlers. All state lives in `data_dir`, one
/// `<id>.json` document per session, so a restarted service resumes where
/// the old one stopped.
class Service {
 public:
  using ScenarioFactory = std::function<ScenarioBinding(std::string_view)>;

  /// `factory` maps scenario kinds to runners; unknown kinds must throw
  /// ArgumentError.
  explicit Service(std::filesystem::path data_dir, ScenarioFactory factory = make_scenario);

  /// 404 for an unknown scenario, 400 for invalid overrides.
  Json create_session(const std::string& scenario, const Json& overrides);
  /// Pending pair, or the final result once finished. 404 for an unknown id.
  Json get_query(const std::string& id);
  /// `body` is {"b": -1 | 0 | 1} with an optional "pair": [i, j] guard.
  /// 400 for a bad b, 409 when no query is pending, the pair does not match,
  /// or another request is mutating the same session.
  Json post_preference(const std::string& id, const Json& body);
  /// format "csv" or "session-file"; 400 otherwise.
  ExportDocument export_session(const std::string& id, const std::string& format);
  Json list_sessions();

  const std::filesystem::path& data_dir() const { return dir_; }

 private:
  struct Entry {
    std::mutex actor;     // held for the whole of a mutating request
    std::mutex snapshot;  // guards `record`
    std::shared_ptr<const SessionRecord> record;
    std::shared_ptr<const ScenarioBinding> binding;
  };

  std::shared_ptr<Entry> entry(const std::string& id);
  std::shared_ptr<const SessionRecord> snapshot(Entry& e);
  void persist(const SessionRecord& r) const;
  std::filesystem::path path_of(const std::string& id) const;
  std::string new_id();

  std::filesystem::path dir_;
  ScenarioFactory factory_;
  std::mutex sessions_mtx_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// View of the current query (or the finished result) as served to clients.
Json query_view(const SessionRecord& r);

void register_routes(httplib::Server& server, Service& service);

struct ServeOptions {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::filesystem::path data_dir = "sessions";
  int request_timeout_s = 120;
};

/// PREF_TUNE_PORT and PREF_TUNE_DATA override the defaults.
ServeOptions serve_options_from_env();

/// Blocks until the server stops. Returns false if the port could not be bound.
bool serve(const ServeOptions& opts);

}  // namespace preftune
