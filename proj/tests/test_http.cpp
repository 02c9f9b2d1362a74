#include "gazecode/http_server.hpp"

#include "support/scripted_client.hpp"
#include "support/temp_dir.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <thread>

using namespace gazecode;
using gazecode::testing::run_scripted_session;
using gazecode::testing::Step;
using gazecode::testing::TempDir;

namespace {

Json create_body() {
  return Json{{"geometry", geometry_to_json(DeviceGeometry{})},
              {"config", Json{{"seed", 9}}},
              {"created_utc", "2026-10-19T10:00:00Z"}};
}

HttpResponse call(CollectionService& s, const std::string& method, const std::string& path, const Json& body = Json()) {
  return route_request(s, method, path, body.is_null() ? std::string() : body.dump());
}

} // namespace

TEST(Router, StatusCodes) {
  TempDir dir;
  CollectionService service(dir.path());
  const HttpResponse created = call(service, "POST", "/api/v1/sessions", create_body());
  EXPECT_EQ(created.status, 201);
  const std::string sid = Json::parse(created.body)["session_id"];
  const std::string p = "/api/v1/sessions/" + sid;

  Json bad = create_body();
  bad["geometry"]["dpi"] = 0;
  EXPECT_EQ(call(service, "POST", "/api/v1/sessions", bad).status, 400);
  EXPECT_EQ(route_request(service, "POST", "/api/v1/sessions", "{oops").status, 400);
  EXPECT_EQ(call(service, "GET", "/api/v1/sessions/zzz/trials/next").status, 404);
  EXPECT_EQ(call(service, "GET", "/api/v1/elsewhere").status, 404);

  EXPECT_EQ(call(service, "GET", p + "/trials/next").status, 200);
  EXPECT_EQ(call(service, "GET", p + "/trials/next").status, 409);
  EXPECT_EQ(call(service, "GET", p + "/export").status, 409);

  const Json regress = Json::array({Json{{"t", "frame"}, {"ts", 10}, {"idx", 0}}, Json{{"t", "frame"}, {"ts", 9}, {"idx", 1}}});
  const HttpResponse r = call(service, "POST", p + "/trials/0/events", regress);
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(Json::parse(r.body)["index"], 1);
  EXPECT_EQ(call(service, "POST", p + "/trials/3/events", Json::array()).status, 404);

  EXPECT_EQ(call(service, "POST", p + "/trials/0/entry", Json{{"entered", "0000"}, {"ts", 1}}).status, 200);
  EXPECT_EQ(call(service, "POST", p + "/trials/0/entry", Json{{"entered", "0000"}, {"ts", 2}}).status, 409);
  EXPECT_EQ(call(service, "POST", p + "/finalize").status, 200);
  const HttpResponse exported = call(service, "GET", p + "/export");
  EXPECT_EQ(exported.status, 200);
  EXPECT_NO_THROW(parse_session(exported.body));
  const HttpResponse labels = call(service, "GET", p + "/labels");
  EXPECT_EQ(labels.status, 200);
  EXPECT_EQ(labels.content_type, "text/csv");
}

TEST(Router, ReplayedTranscriptExportsIdenticalLog) {
  auto run = [](const std::vector<Step>* replay) {
    TempDir dir;
    CollectionService service(dir.path());
    auto send = [&](const Step& s) {
      const HttpResponse r = route_request(service, s.method, s.path, s.body.is_null() ? "" : s.body.dump());
      EXPECT_LT(r.status, 300) << s.method << " " << s.path << " " << r.body;
      return Json::parse(r.body);
    };
    std::vector<Step> steps;
    if (replay) {
      for (const auto& s : *replay) {
        send(s);
      }
      steps = *replay;
    } else {
      steps = run_scripted_session(send, create_body(), 6, true);
    }
    return std::make_pair(steps, route_request(service, "GET", "/api/v1/sessions/s000001/export", "").body);
  };
  const auto [steps, original] = run(nullptr);
  const auto [_, replayed] = run(&steps);
  EXPECT_FALSE(original.empty());
  EXPECT_EQ(original, replayed);
}

TEST(ServerOptions, EnvironmentThenFlags) {
  ::setenv("GAZECODE_BIND", "0.0.0.0:9911", 1);
  ::setenv("GAZECODE_DATA_DIR", "/tmp/gz-env", 1);
  ServerOptions o = ServerOptions::from_environment();
  EXPECT_EQ(o.bind, "0.0.0.0:9911");
  EXPECT_EQ(o.data_dir, "/tmp/gz-env");
  EXPECT_EQ(o.host_port(), std::make_pair(std::string("0.0.0.0"), 9911));
  ::unsetenv("GAZECODE_BIND");
  ::unsetenv("GAZECODE_DATA_DIR");
  EXPECT_EQ(ServerOptions::from_environment().bind, "127.0.0.1:8080");
  o.bind = "nonsense";
  EXPECT_THROW(o.host_port(), Error);
}

TEST(ServerOptions, ConfigFileOverridesDefaults) {
  TempDir dir;
  const auto path = dir.path() / "config.json";
  std::ofstream(path) << R"({"code_length": 5, "orientation_policy": "void"})";
  ServerOptions o;
  o.config_file = path.string();
  const ServiceSessionConfig c = o.session_defaults();
  EXPECT_EQ(c.protocol.code_length, 5);
  EXPECT_EQ(c.orientation_policy, OrientationPolicy::Void);
  EXPECT_EQ(c.schedule, formative_schedule());
}

TEST(HttpServer, LoopbackRoundTrip) {
  TempDir dir;
  CollectionService service(dir.path());
  httplib::Server server;
  mount_routes(server, service);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread loop([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto send = [&](const Step& s) {
    const auto res = s.method == "GET" ? client.Get(s.path)
                                       : client.Post(s.path, s.body.is_null() ? "" : s.body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_LT(res->status, 300) << res->body;
    return Json::parse(res->body);
  };
  run_scripted_session(send, create_body(), 3, false);
  const auto exported = client.Get("/api/v1/sessions/s000001/export");
  ASSERT_TRUE(exported);
  EXPECT_EQ(exported->status, 200);
  const SessionLog log = parse_session(exported->body);
  EXPECT_EQ(log.collect<EntryRecord>().size(), 3u);
  const auto labels = client.Get("/api/v1/sessions/s000001/labels");
  EXPECT_EQ(labels->status, 200);
  EXPECT_EQ(labels->body.rfind(std::string(kLabelHeader), 0), 0u);

  server.stop();
  loop.join();
}
