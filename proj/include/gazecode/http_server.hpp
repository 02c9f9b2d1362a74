#pragma once

#include "gazecode/service.hpp"

#include <httplib.h>

#include <cstdlib>
#include <optional>
#include <regex>
#include <string>

namespace gazecode {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline HttpResponse error_response(const Error& e) {
  Json body{{"error", to_string(e.code())}, {"message", e.message()}};
  if (e.line() > 0) {
    body["index"] = e.line() - 1;
  }
  return {http_status(e.code()), body.dump(), "application/json"};
}

/// Dispatches one API request. Pure apart from the service call, so tests
/// can drive the full API surface without sockets.
inline HttpResponse route_request(CollectionService& service, const std::string& method, const std::string& path,
                                  const std::string& body_text) {
  static const std::regex kSessions(R"(/api/v1/sessions/?)");
  static const std::regex kSession(R"(/api/v1/sessions/([A-Za-z0-9_-]+))");
  static const std::regex kNext(R"(/api/v1/sessions/([A-Za-z0-9_-]+)/trials/next)");
  static const std::regex kTrialOp(R"(/api/v1/sessions/([A-Za-z0-9_-]+)/trials/([0-9]+)/(events|entry|void))");
  static const std::regex kSessionOp(R"(/api/v1/sessions/([A-Za-z0-9_-]+)/(finalize|export|labels))");

  auto json = [](int status, const Json& j) { return HttpResponse{status, j.dump(), "application/json"}; };
  try {
    Json body;
    if (!body_text.empty()) {
      body = Json::parse(body_text, nullptr, false);
      if (body.is_discarded()) {
        return json(400, Json{{"error", "invalid-argument"}, {"message", "request body is not valid JSON"}});
      }
    }
    std::smatch m;
    if (std::regex_match(path, m, kSessions)) {
      if (method != "POST") {
        return json(405, Json{{"error", "method-not-allowed"}, {"message", method + " " + path}});
      }
      return json(201, service.create_session(body));
    }
    if (std::regex_match(path, m, kNext) && method == "GET") {
      return json(200, service.next_trial(m[1]));
    }
    if (std::regex_match(path, m, kTrialOp) && method == "POST") {
      const TrialId tid = std::stoull(m[2]);
      const std::string op = m[3];
      if (op == "events") {
        return json(200, service.submit_events(m[1], tid, body));
      }
      if (op == "entry") {
        return json(200, service.submit_entry(m[1], tid, body));
      }
      return json(200, service.void_trial(m[1], tid, body.is_null() ? Json::object() : body));
    }
    if (std::regex_match(path, m, kSessionOp)) {
      const std::string op = m[2];
      if (op == "finalize" && method == "POST") {
        return json(200, service.finalize(m[1], body.is_null() ? Json::object() : body));
      }
      if (op == "export" && method == "GET") {
        return {200, service.export_session(m[1]), "application/x-ndjson"};
      }
      if (op == "labels" && method == "GET") {
        return {200, service.export_labels(m[1]), "text/csv"};
      }
    }
    if (std::regex_match(path, m, kSession) && method == "GET") {
      return json(200, service.describe(m[1]));
    }
    return json(404, Json{{"error", "not-found"}, {"message", "no route for " + method + " " + path}});
  } catch (const Error& e) {
    return error_response(e);
  } catch (const std::exception& e) {
    return json(500, Json{{"error", "internal"}, {"message", e.what()}});
  }
}

/// Server settings. Resolution order: built-in defaults, then GAZECODE_*
/// environment variables, then explicit flags.
struct ServerOptions {
  std::string data_dir = "gazecode-data";
  std::string bind = "127.0.0.1:8080";
  std::string config_file;
  std::string static_dir;

  static ServerOptions from_environment() {
    ServerOptions o;
    auto env = [](const char* name, std::string& slot) {
      if (const char* v = std::getenv(name); v != nullptr && *v != '\0') {
        slot = v;
      }
    };
    env("GAZECODE_DATA_DIR", o.data_dir);
    env("GAZECODE_BIND", o.bind);
    env("GAZECODE_CONFIG", o.config_file);
    env("GAZECODE_STATIC_DIR", o.static_dir);
    return o;
  }

  [[nodiscard]] std::pair<std::string, int> host_port() const {
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
      throw Error(ErrorCode::InvalidConfiguration, "bind address must be host:port");
    }
    int port = 0;
    try {
      port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidConfiguration, "bind port is not a number");
    }
    if (port < 0 || port > 65535) {
      throw Error(ErrorCode::InvalidConfiguration, "bind port out of range");
    }
    return {bind.substr(0, colon), port};
  }

  /// Default session config, with the config file (if any) merged over the
  /// built-in defaults.
  [[nodiscard]] ServiceSessionConfig session_defaults() const {
    if (config_file.empty()) {
      return {};
    }
    std::ifstream in(config_file);
    if (!in) {
      throw Error(ErrorCode::InvalidConfiguration, "cannot read config file " + config_file);
    }
    Json patch = Json::parse(in, nullptr, false);
    if (patch.is_discarded() || !patch.is_object()) {
      throw Error(ErrorCode::InvalidConfiguration, "config file must hold a JSON object");
    }
    Json merged = to_json(ServiceSessionConfig{});
    merged.merge_patch(patch);
    return service_config_from_json(merged);
  }
};

/// Registers the API routes (and optional static UI bundle) on `server`.
inline void mount_routes(httplib::Server& server, CollectionService& service, const std::string& static_dir = {}) {
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse out = route_request(service, req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  const std::string pattern = R"(/api/v1/.*)";
  server.Get(pattern, handler);
  server.Post(pattern, handler);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
    throw Error(ErrorCode::InvalidConfiguration, "static directory does not exist: " + static_dir);
  }
}

} // namespace gazecode
