#include <atomic>
#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "json.hpp"

#include "fixtures.hpp"

#include "cup/digest.hpp"
#include "cup/error.hpp"
#include "cup/llm.hpp"

// After the library headers: httplib pulls in <resolv.h>, whose _res macro
// collides with Eigen parameter names.
#include "httplib.h"

using namespace cup;

namespace {

CompletionRequest request(std::string prompt, std::string model = "m") {
  CompletionRequest r;
  r.model_id = std::move(model);
  r.prompt = std::move(prompt);
  return r;
}

// Local chat-completions server whose handler is swapped per test.
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
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string reply(const std::string& content) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}}}.dump();
}

HttpBackendConfig http_config(const std::string& endpoint) {
  HttpBackendConfig c;
  c.endpoint = endpoint;
  c.api_key_env = "CUP_TEST_API_KEY";
  c.max_retries = 2;
  c.backoff_ms = 1;
  c.timeout_seconds = 5;
  return c;
}

}  // namespace

TEST_CASE("mock backend") {
  MockBackend mock({"m"}, std::vector<MockBackend::Rule>{{"*", {"p"}, "x"}, {"m", {}, "fallback"}});
  CHECK(complete(request("p"), mock) == "x");
  CHECK(complete(request("q"), mock) == "fallback");
  CHECK(mock.calls() == 2);
  try {
    complete(request("p", "other"), mock);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.kind() == TransportKind::kBackendConfig);
    CHECK(e.code() == ErrorCode::kConfig);
  }
  MockBackend empty({"m"}, std::vector<MockBackend::Rule>{});
  CHECK_THROWS_AS(complete(request("p"), empty), TransportError);

  auto bad = request("p");
  bad.temperature = 3.0;
  CHECK_THROWS_AS(complete(bad, mock), ContractError);
  CHECK_THROWS_AS(complete(request(""), mock), ContractError);
}

TEST_CASE("response cache") {
  const auto dir = fixtures::temp_dir("llm-cache");
  const auto file = dir / "cache.jsonl";
  MockBackend mock({"m"}, [](const CompletionRequest& r) { return "reply to " + r.prompt; });

  {
    ResponseCache cache(file);
    CHECK(cached_complete(request("a"), mock, &cache) == "reply to a");
    CHECK(cached_complete(request("a"), mock, &cache) == "reply to a");
    CHECK(mock.calls() == 1);
    for (const char* p : {"b", "c", "d"}) cached_complete(request(p), mock, &cache);
    CHECK(cache.size() == 4);
  }

  SUBCASE("warm reload makes no calls") {
    ResponseCache cache(file);
    const auto before = mock.calls();
    for (const char* p : {"a", "b", "c", "d"}) CHECK(cached_complete(request(p), mock, &cache) == "reply to " + std::string(p));
    CHECK(mock.calls() == before);
  }

  SUBCASE("prompt version, temperature and seed are part of the key") {
    auto r = request("a");
    const auto base = ResponseCache::key(r);
    r.prompt_version = "other-version";
    CHECK(ResponseCache::key(r) != base);
    r = request("a");
    r.temperature = 0.7;
    CHECK(ResponseCache::key(r) != base);
    r = request("a");
    r.seed = 3;
    CHECK(ResponseCache::key(r) != base);
    ResponseCache cache(file);
    auto miss = request("a");
    miss.prompt_version = "other-version";
    CHECK_FALSE(cache.lookup(miss).has_value());
  }

  SUBCASE("tampered record raises an integrity error naming the key") {
    std::string text = read_file(file);
    const auto pos = text.find("reply to b");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "reply to B");
    write_file(file, text);
    try {
      ResponseCache cache(file);
      FAIL("expected CacheIntegrityError");
    } catch (const CacheIntegrityError& e) {
      CHECK(e.key().size() == 64);
    }
    write_file(file, "not json\n");
    CHECK_THROWS_AS(ResponseCache{file}, CacheIntegrityError);
  }

  CHECK(cached_complete(request("z"), mock, nullptr) == "reply to z");
}

TEST_CASE("http backend") {
  SUBCASE("request body and credential") {
    std::string seen_auth, seen_body;
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
      seen_auth = req.get_header_value("Authorization");
      seen_body = req.body;
      res.set_content(reply("Returns the count."), "application/json");
    });
    ::setenv("CUP_TEST_API_KEY", "secret-token", 1);
    HttpChatBackend backend(http_config(server.endpoint()));
    auto r = request("hello");
    r.seed = 9;
    CHECK(complete(r, backend) == "Returns the count.");
    ::unsetenv("CUP_TEST_API_KEY");
    CHECK(seen_auth == "Bearer secret-token");
    const auto body = nlohmann::json::parse(seen_body);
    CHECK(body["model"] == "m");
    CHECK(body["messages"][0]["role"] == "user");
    CHECK(body["messages"][0]["content"] == "hello");
    CHECK(body["max_tokens"] == 256);
    CHECK(body["seed"] == 9);
  }

  SUBCASE("503 is retried") {
    std::atomic<int> hits{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
      if (hits++ < 2) {
        res.status = 503;
        return;
      }
      res.set_content(reply("ok"), "application/json");
    });
    HttpChatBackend backend(http_config(server.endpoint()));
    CHECK(complete(request("p"), backend) == "ok");
    CHECK(hits == 3);
  }

  SUBCASE("retries are bounded") {
    std::atomic<int> hits{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 429;
    });
    HttpChatBackend backend(http_config(server.endpoint()));
    try {
      complete(request("p"), backend);
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.kind() == TransportKind::kRateLimit);
    }
    CHECK(hits == 3);
  }

  SUBCASE("401 is an auth error without retry") {
    std::atomic<int> hits{0};
    FakeServer server([&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 401;
    });
    HttpChatBackend backend(http_config(server.endpoint()));
    try {
      complete(request("p"), backend);
      FAIL("expected TransportError");
    } catch (const TransportError& e) {
      CHECK(e.kind() == TransportKind::kAuth);
    }
    CHECK(hits == 1);
  }

  SUBCASE("malformed and empty replies") {
    FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      if (body["messages"][0]["content"] == "empty") {
        res.set_content(reply(""), "application/json");
      } else {
        res.set_content(R"({"choices": []})", "application/json");
      }
    });
    HttpChatBackend backend(http_config(server.endpoint()));
    for (const char* p : {"p", "empty"}) {
      try {
        complete(request(p), backend);
        FAIL("expected TransportError");
      } catch (const TransportError& e) {
        CHECK(e.kind() == TransportKind::kMalformedReply);
      }
    }
  }

  SUBCASE("configuration") {
    CHECK_THROWS_AS(HttpChatBackend(http_config("localhost:80")), ConfigError);
    auto c = http_config("http://127.0.0.1:1/v1");
    c.models = {"only-this"};
    HttpChatBackend backend(c);
    CHECK_THROWS_AS(complete(request("p"), backend), TransportError);
  }
}
