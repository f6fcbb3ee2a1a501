#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "support.hpp"
#include "xplore/error.hpp"
#include "xplore/modelclient.hpp"

using namespace xplore;
using namespace xplore::model;
using testing_support::TempDir;

namespace {

Errc code_of(const std::function<void()> &fn) {
  try {
    fn();
  } catch (const Error &e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an xplore::Error";
  return Errc::io_error;
}

class CountingBackend : public Backend {
public:
  explicit CountingBackend(json body) : body_(std::move(body)) {}
  BackendKind kind() const noexcept override { return BackendKind::mock; }
  json call(const InferenceRequest &) override {
    ++calls;
    return body_;
  }
  int calls = 0;

private:
  json body_;
};

// Local HTTP server on an ephemeral port, torn down with the fixture.
class StubServer {
public:
  explicit StubServer(std::function<void(const httplib::Request &, httplib::Response &)> handler) {
    server_.Post("/api/v1/infer", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api"; }

private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

} // namespace

TEST(Request, IdIsContentAddressed) {
  auto a = make_request(Endpoint::qa_answer, {{"q", "x"}, {"n", 1}});
  auto b = make_request(Endpoint::qa_answer, {{"n", 1}, {"q", "x"}});
  auto c = make_request(Endpoint::vh_generate, {{"q", "x"}, {"n", 1}});
  EXPECT_EQ(a.request_id, b.request_id);
  EXPECT_NE(a.request_id, c.request_id);
  EXPECT_EQ(a.request_id.size(), 64u);
  EXPECT_EQ(code_of([] { make_request(Endpoint::qa_answer, json::array()); }), Errc::invalid_config);
}

TEST(Endpoints, NamesRoundTrip) {
  for (auto e : {Endpoint::vh_generate, Endpoint::action_generate, Endpoint::cluster_decide, Endpoint::qa_answer})
    EXPECT_EQ(endpoint_from_name(endpoint_name(e)), e);
  EXPECT_EQ(code_of([] { endpoint_from_name("nope"); }), Errc::invalid_config);
}

TEST(ValidateResponse, Schemas) {
  EXPECT_NO_THROW(validate_response(Endpoint::qa_answer, {{"reply", "B"}}));
  EXPECT_NO_THROW(validate_response(Endpoint::cluster_decide, {{"match", 3}}));
  EXPECT_NO_THROW(validate_response(Endpoint::cluster_decide, {{"new", "Settings"}}));
  EXPECT_NO_THROW(validate_response(Endpoint::vh_generate, {{"vh_lines", {"0|A|||0"}}}));
  for (const auto &[ep, body] : std::vector<std::pair<Endpoint, json>>{
           {Endpoint::qa_answer, json{{"reply", 3}}},
           {Endpoint::qa_answer, json::array()},
           {Endpoint::cluster_decide, json{{"match", "x"}}},
           {Endpoint::cluster_decide, json::object()},
           {Endpoint::vh_generate, json{{"vh_lines", "0|A|||0"}}},
           {Endpoint::action_generate, json{{"action", 1}}}})
    EXPECT_EQ(code_of([&] { validate_response(ep, body); }), Errc::backend_malformed_reply) << body;
}

TEST(Mock, Defaults) {
  ModelClient client(mock_backend());
  EXPECT_EQ(client.invoke(Endpoint::qa_answer, {{"question", "?"}}).body, (json{{"reply", "A"}}));
  EXPECT_EQ(client.invoke(Endpoint::cluster_decide, {{"nodes", json::array()}}).body, (json{{"new", ""}}));
  auto gen = client.invoke(Endpoint::vh_generate, {{"luma_digest", "abcdef0123456789"}}).body;
  EXPECT_EQ(gen["vh_lines"][0], "0|GeneratedScreen|gen/abcdef012345||0");
  auto act = client.invoke(Endpoint::action_generate, {{"pre", "x"}}).body;
  EXPECT_EQ(act["action"]["kind"], "tap");
}

TEST(Mock, HiddenLabelEcho) {
  ModelClient client(mock_backend());
  json nodes = json::array({{{"id", 0}, {"description", "Home"}}, {{"id", 1}, {"description", "Settings"}}});
  EXPECT_EQ(client.invoke(Endpoint::cluster_decide, {{"nodes", nodes}, {"hidden_label", "Settings"}}).body,
            (json{{"match", 1}}));
  EXPECT_EQ(client.invoke(Endpoint::cluster_decide, {{"nodes", nodes}, {"hidden_label", "Cart"}}).body,
            (json{{"new", "Cart"}}));
}

TEST(Mock, FixturesByIdAndPattern) {
  auto req = make_request(Endpoint::qa_answer, {{"question", "exact"}});
  auto fixtures = parse_fixtures(json::array({
      {{"request_id", req.request_id}, {"body", {{"reply", "C"}}}},
      {{"endpoint", "qa_answer"}, {"match", {{"task", "reach"}}}, {"body", {{"reply", "D"}}}},
      {{"endpoint", "vh_generate"}, {"match", {{"task", "reach"}}}, {"body", {{"vh_lines", json::array()}}}},
  }));
  ModelClient client(mock_backend(fixtures));
  EXPECT_EQ(client.invoke(req).body["reply"], "C");
  EXPECT_EQ(client.invoke(Endpoint::qa_answer, {{"task", "reach"}, {"q", 1}}).body["reply"], "D");
  EXPECT_EQ(client.invoke(Endpoint::qa_answer, {{"task", "other"}}).body["reply"], "A");
  EXPECT_EQ(code_of([] { parse_fixtures(json::array({{{"match", json::object()}}})); }), Errc::invalid_config);
}

TEST(Client, MemoryCacheAndStats) {
  auto backend = std::make_shared<CountingBackend>(json{{"reply", "B"}});
  ModelClient client(backend);
  auto first = client.invoke(Endpoint::qa_answer, {{"q", "one two three"}});
  auto second = client.invoke(Endpoint::qa_answer, {{"q", "one two three"}});
  EXPECT_EQ(first.backend, BackendKind::mock);
  EXPECT_EQ(second.backend, BackendKind::cache);
  EXPECT_EQ(first.body, second.body);
  EXPECT_EQ(backend->calls, 1);
  EXPECT_EQ(client.backend_calls(), 1u);
  auto stats = client.stats();
  EXPECT_EQ(stats.total_calls(), 2u);
  EXPECT_EQ(stats.total_cache_hits(), 1u);
  EXPECT_EQ(stats.total_tokens(), 6u);
  auto doc = to_json(stats);
  EXPECT_EQ(doc["cache_hits"], 1);
}

TEST(Client, DiskCacheServesWithoutBackend) {
  TempDir dir;
  json payload{{"q", "cached"}};
  {
    ModelClient writer(std::make_shared<CountingBackend>(json{{"reply", "E"}}), dir.path());
    writer.invoke(Endpoint::qa_answer, payload);
  }
  auto req = make_request(Endpoint::qa_answer, payload);
  EXPECT_TRUE(std::filesystem::exists(dir / "qa_answer" / (req.request_id + ".json")));
  ModelClient reader(nullptr, dir.path());
  auto res = reader.invoke(req);
  EXPECT_EQ(res.body["reply"], "E");
  EXPECT_EQ(res.backend, BackendKind::cache);
  EXPECT_EQ(code_of([&] { reader.invoke(Endpoint::qa_answer, {{"q", "miss"}}); }), Errc::no_backend);
}

TEST(Client, CorruptCacheEntryIsRefetched) {
  TempDir dir;
  auto req = make_request(Endpoint::qa_answer, {{"q", "x"}});
  write_text_atomic(dir / "qa_answer" / (req.request_id + ".json"), "{ broken");
  auto backend = std::make_shared<CountingBackend>(json{{"reply", "F"}});
  ModelClient client(backend, dir.path());
  EXPECT_EQ(client.invoke(req).body["reply"], "F");
  EXPECT_EQ(backend->calls, 1);
}

TEST(Client, InvalidBackendReplyIsNotCached) {
  auto backend = std::make_shared<CountingBackend>(json{{"answer", "B"}});
  ModelClient client(backend);
  EXPECT_EQ(code_of([&] { client.invoke(Endpoint::qa_answer, {{"q", 1}}); }), Errc::backend_malformed_reply);
  EXPECT_EQ(code_of([&] { client.invoke(Endpoint::qa_answer, {{"q", 1}}); }), Errc::backend_malformed_reply);
  EXPECT_EQ(backend->calls, 2);
}

TEST(Client, ConcurrentInvocationsAgree) {
  ModelClient client(mock_backend());
  std::vector<std::thread> threads;
  std::vector<std::string> replies(16);
  for (int i = 0; i < 16; ++i)
    threads.emplace_back([&, i] { replies[static_cast<std::size_t>(i)] = client.invoke(Endpoint::qa_answer, {{"q", i % 4}}).body["reply"]; });
  for (auto &t : threads)
    t.join();
  for (const auto &r : replies)
    EXPECT_EQ(r, "A");
  EXPECT_EQ(client.stats().total_calls(), 16u);
}

TEST(Remote, RoundTrip) {
  json seen;
  StubServer server([&](const httplib::Request &req, httplib::Response &res) {
    seen = json::parse(req.body);
    res.set_content(json{{"body", {{"reply", "C"}}}}.dump(), "application/json");
  });
  ModelClient client(remote_backend({server.url(), std::chrono::seconds(5), 2}));
  auto res = client.invoke(Endpoint::qa_answer, {{"q", "hello"}});
  EXPECT_EQ(res.body["reply"], "C");
  EXPECT_EQ(res.backend, BackendKind::remote);
  EXPECT_EQ(seen["endpoint"], "qa_answer");
  EXPECT_EQ(seen["payload"]["q"], "hello");
}

TEST(Remote, MalformedReply) {
  StubServer server([](const httplib::Request &, httplib::Response &res) {
    res.set_content("not json at all", "text/plain");
  });
  ModelClient client(remote_backend({server.url(), std::chrono::seconds(5), 1}));
  EXPECT_EQ(code_of([&] { client.invoke(Endpoint::qa_answer, {{"q", 1}}); }), Errc::backend_malformed_reply);
}

TEST(Remote, WrongSchema) {
  StubServer server([](const httplib::Request &, httplib::Response &res) {
    res.set_content(json{{"body", {{"match", "x"}}}}.dump(), "application/json");
  });
  ModelClient client(remote_backend({server.url(), std::chrono::seconds(5), 1}));
  EXPECT_EQ(code_of([&] { client.invoke(Endpoint::cluster_decide, {{"q", 1}}); }), Errc::backend_malformed_reply);
}

TEST(Remote, HttpErrorStatus) {
  StubServer server([](const httplib::Request &, httplib::Response &res) { res.status = 503; });
  ModelClient client(remote_backend({server.url(), std::chrono::seconds(5), 1}));
  auto code = code_of([&] { client.invoke(Endpoint::qa_answer, {{"q", 1}}); });
  EXPECT_EQ(code, Errc::client_unavailable);
  EXPECT_TRUE(is_backend_error(code));
}

TEST(Remote, Timeout) {
  StubServer server([](const httplib::Request &, httplib::Response &res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(2500));
    res.set_content(json{{"body", {{"reply", "A"}}}}.dump(), "application/json");
  });
  ModelClient client(remote_backend({server.url(), std::chrono::seconds(1), 1}));
  EXPECT_EQ(code_of([&] { client.invoke(Endpoint::qa_answer, {{"q", 1}}); }), Errc::backend_timeout);
}

TEST(Remote, Unreachable) {
  int port;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  ModelClient client(remote_backend({"http://127.0.0.1:" + std::to_string(port), std::chrono::seconds(2), 1}));
  auto code = code_of([&] { client.invoke(Endpoint::qa_answer, {{"q", 1}}); });
  EXPECT_TRUE(code == Errc::client_unavailable || code == Errc::backend_timeout) << errc_name(code);
  EXPECT_EQ(code_of([] { remote_backend({}); }), Errc::invalid_config);
}
