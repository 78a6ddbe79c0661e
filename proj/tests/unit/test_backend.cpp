#include <doctest.h>

#include <atomic>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gen.hpp"
#include "testutil.hpp"
#include "vitaudit/backend.hpp"
#include "vitaudit/parallel.hpp"

using namespace vitaudit;
using namespace vitaudit::testing;
using namespace std::chrono_literals;

namespace {

std::vector<ChatMessage> user(const std::string& text) { return {ChatMessage::user(text)}; }

/// Local chat-completion server on an ephemeral port.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply_body(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

BackendProfile http_profile(const std::string& endpoint) {
  BackendProfile p;
  p.name = "test";
  p.endpoint = endpoint;
  p.model_id = "m";
  p.backoff_base = 1ms;
  p.max_retries = 3;
  p.timeout = 2000ms;
  p.vision = true;
  return p;
}

}  // namespace

TEST_CASE("fingerprints depend on role and text only") {
  const auto a = fingerprint(user("hello"));
  CHECK(a.size() == 16);
  CHECK(a == fingerprint(user("hello")));
  CHECK(a != fingerprint(user("hello ")));
  const std::vector<ChatMessage> sys{ChatMessage::system("hello")};
  CHECK(a != fingerprint(sys));
  const std::vector<ChatMessage> split{ChatMessage::user("hel"), ChatMessage::user("lo")};
  CHECK(a != fingerprint(split));
  const std::vector<ChatMessage> img{ChatMessage::user("hello", "x.png")};
  CHECK(a == fingerprint(img));
}

TEST_CASE("no fingerprint collisions over generated prompts") {
  Gen g(41);
  std::set<std::string> prompts;
  while (prompts.size() < 1000) prompts.insert(random_text(g, 1, 30, true));
  std::set<std::string> fps;
  for (const auto& p : prompts) fps.insert(fingerprint(user(p)));
  CHECK(fps.size() == prompts.size());
}

TEST_CASE("mock lookup order and miss accounting") {
  MockScript s = MockScript::parse(R"({
    "fallback": "fb",
    "replies": {")" + fingerprint(user("exact prompt")) + R"(": "by fingerprint"},
    "rules": [{"contains": ["alpha", "beta"], "reply": "both"}, {"contains": "alpha", "reply": "one"}]
  })");
  MockBackend m(s);
  CHECK(m.complete(user("exact prompt")).text == "by fingerprint");
  CHECK(m.complete(user("alpha and beta")).text == "both");
  CHECK(m.complete(user("only alpha")).text == "one");
  CHECK(m.misses() == 0);
  CHECK(m.complete(user("nothing")).text == "fb");
  CHECK(m.misses() == 1);
  CHECK(m.missed_fingerprints() == std::vector<std::string>{fingerprint(user("nothing"))});
  CHECK(m.calls() == 4);
}

TEST_CASE("mock replies are deterministic under concurrency") {
  MockScript s;
  std::vector<std::string> prompts;
  for (int i = 0; i < 200; ++i) {
    prompts.push_back("prompt " + std::to_string(i));
    s.by_fingerprint[fingerprint(user(prompts.back()))] = "reply " + std::to_string(i);
  }
  MockBackend m(s);
  const auto run = [&](int conc) {
    return parallel_map(std::span<const std::string>(prompts), conc,
                        [&](const std::string& p) { return m.complete(user(p)).text; });
  };
  const auto serial = run(1);
  CHECK(run(8) == serial);
  CHECK(serial[17] == "reply 17");
}

TEST_CASE("in-flight bound holds") {
  auto p = MockBackend::default_profile();
  p.max_in_flight = 3;
  MockBackend m([](std::span<const ChatMessage>) { return std::string("ok"); }, p);
  m.set_latency(2ms);
  std::vector<int> items(48);
  parallel_map(std::span<const int>(items), 8, [&](int) { return m.complete(user("x")).text; });
  CHECK(m.peak_in_flight() <= 3);
  CHECK(m.peak_in_flight() >= 1);
  CHECK(m.calls() == 48);
}

TEST_CASE("request validation happens before any call") {
  MockBackend m([](std::span<const ChatMessage>) { return std::string("ok"); });
  const std::vector<ChatMessage> missing{ChatMessage::user("look", "/nonexistent/image.png")};
  try {
    m.complete(missing);
    FAIL("expected UnreadableImage");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::UnreadableImage);
  }
  CHECK_THROWS_AS(m.complete(std::span<const ChatMessage>{}), BackendError);
  const std::vector<ChatMessage> sys_img{ChatMessage{Role::System, "s", "x.png"}};
  CHECK_THROWS_AS(m.complete(sys_img), BackendError);
  CHECK(m.calls() == 0);
  const std::vector<ChatMessage> uri{ChatMessage::user("look", "https://example.com/a.png")};
  CHECK(m.complete(uri).text == "ok");
}

TEST_CASE("profile validation") {
  BackendProfile p;
  CHECK_NOTHROW(p.validate());
  p.max_in_flight = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.max_in_flight = 1;
  p.timeout = 0ms;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_THROWS_AS(InFlightLimiter(0), std::invalid_argument);
}

TEST_CASE("base64") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK(base64_encode("foo") == "Zm9v");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_encode(std::string("\xff\x00\x10", 3)) == "/wAQ");
}

TEST_CASE("request body inlines images and is greedy by default") {
  TempDir dir("http");
  write_file(dir / "img.png", "foo");
  HttpBackend b(http_profile("http://127.0.0.1:9/v1/chat/completions"));
  const std::vector<ChatMessage> msgs{ChatMessage::system("sys"), ChatMessage::user("look", (dir / "img.png").string())};
  const auto body = nlohmann::json::parse(b.build_request_body(msgs));
  CHECK(body["model"] == "m");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["messages"][0]["role"] == "system");
  CHECK(body["messages"][0]["content"] == "sys");
  CHECK(body["messages"][1]["content"][0]["text"] == "look");
  CHECK(body["messages"][1]["content"][1]["image_url"]["url"] == "data:image/png;base64,Zm9v");

  auto p = http_profile("http://127.0.0.1:9/x");
  p.temperature_override = 0.7;
  CHECK(nlohmann::json::parse(HttpBackend(p).build_request_body(user("x")))["temperature"] == 0.7);
  CHECK_THROWS_AS(HttpBackend(http_profile("localhost:8000")), std::invalid_argument);
}

TEST_CASE("response body parsing") {
  CHECK(HttpBackend::parse_response_body(reply_body("hi")) == "hi");
  CHECK(HttpBackend::parse_response_body(
            R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})") ==
        "ab");
  CHECK_THROWS_AS(HttpBackend::parse_response_body("nope"), BackendError);
  CHECK_THROWS_AS(HttpBackend::parse_response_body(R"({"choices":[]})"), BackendError);
  CHECK_THROWS_AS(HttpBackend::parse_response_body(R"({"choices":[{"message":{}}]})"), BackendError);
}

TEST_CASE("transient server errors are retried") {
  std::atomic<int> hits{0};
  std::string auth;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    if (++hits <= 2) {
      res.status = 503;
      return;
    }
    const auto j = nlohmann::json::parse(req.body);
    res.set_content(reply_body("echo " + j["messages"][0]["content"].get<std::string>()), "application/json");
  });
  ::setenv("VITAUDIT_TEST_KEY", "sekrit", 1);
  auto p = http_profile(server.endpoint());
  p.api_key_env = "VITAUDIT_TEST_KEY";
  HttpBackend b(p);
  const auto c = b.complete(user("ping"));
  CHECK(c.text == "echo ping");
  CHECK(c.attempts == 3);
  CHECK(hits == 3);
  CHECK(auth == "Bearer sekrit");
}

TEST_CASE("retries are bounded") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 429;
  });
  auto p = http_profile(server.endpoint());
  p.max_retries = 2;
  HttpBackend b(p);
  try {
    b.complete(user("x"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::Status);
    CHECK(e.status() == 429);
    CHECK(e.attempts() == 3);
  }
  CHECK(hits == 3);
}

TEST_CASE("client errors fail fast") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  HttpBackend b(http_profile(server.endpoint()));
  try {
    b.complete(user("x"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::Status);
    CHECK(e.status() == 400);
    CHECK(e.attempts() == 1);
  }
  CHECK(hits == 1);
}

TEST_CASE("unreachable endpoint is a transport error") {
  // nothing listens on port 1
  auto p = http_profile("http://127.0.0.1:1/v1/chat/completions");
  p.max_retries = 1;
  HttpBackend b(p);
  try {
    b.complete(user("x"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::Transport);
    CHECK(e.attempts() == 2);
  }
}

TEST_CASE("malformed success body is reported") {
  FakeServer server([&](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
  HttpBackend b(http_profile(server.endpoint()));
  try {
    b.complete(user("x"));
    FAIL("expected failure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::BadResponse);
  }
}
