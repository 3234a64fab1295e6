#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <thread>

#include "ideolens/backend.hpp"
#include "ideolens/error.hpp"

using namespace ideolens;

namespace {

/// Local stand-in for an OpenAI-compatible /v1/completions endpoint that
/// echoes one token per whitespace-delimited word.
class FakeServer {
 public:
  std::atomic<int> calls{0};
  std::atomic<int> fail_first{0};  // respond 503 to this many requests
  std::atomic<int> fail_status{503};
  std::atomic<bool> reject_zero_tokens{false};
  std::string last_auth;
  nlohmann::json last_body;

  FakeServer() {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const int n = ++calls;
      last_auth = req.get_header_value("Authorization");
      last_body = nlohmann::json::parse(req.body);
      if (n <= fail_first) {
        res.status = fail_status;
        res.set_content("{\"error\":\"busy\"}", "application/json");
        return;
      }
      const int max_tokens = last_body.at("max_tokens").get<int>();
      if (reject_zero_tokens && max_tokens == 0) {
        res.status = 400;
        res.set_content("{\"error\":\"max_tokens must be at least 1\"}", "application/json");
        return;
      }
      const std::string prompt = last_body.at("prompt").get<std::string>();
      nlohmann::json tokens = nlohmann::json::array(), lps = nlohmann::json::array(),
                     offs = nlohmann::json::array();
      std::size_t start = 0;
      for (std::size_t i = 1; i <= prompt.size(); ++i) {
        if (i == prompt.size() || prompt[i] == ' ') {
          tokens.push_back(prompt.substr(start, i - start));
          offs.push_back(start);
          lps.push_back(start == 0 ? nlohmann::json(nullptr) : nlohmann::json(-0.5));
          start = i;
        }
      }
      if (max_tokens > 0) {
        tokens.push_back(" extra");
        offs.push_back(prompt.size());
        lps.push_back(-3.0);
      }
      nlohmann::json doc{
          {"choices",
           {{{"text", prompt},
             {"logprobs", {{"tokens", tokens}, {"token_logprobs", lps}, {"text_offset", offs}}}}}}};
      res.set_content(doc.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpBackendConfig config_for(const FakeServer& s) {
  HttpBackendConfig c;
  c.base_url = s.url();
  c.model = "fake-model";
  c.api_key_env = "IDEOLENS_TEST_KEY";
  c.timeout = std::chrono::milliseconds(5000);
  c.initial_backoff = std::chrono::milliseconds(1);
  return c;
}

struct KeyGuard {
  KeyGuard() { setenv("IDEOLENS_TEST_KEY", "sk-test", 1); }
  ~KeyGuard() { unsetenv("IDEOLENS_TEST_KEY"); }
};

}  // namespace

TEST_CASE("missing API key names the environment variable") {
  unsetenv("IDEOLENS_MISSING_KEY");
  HttpBackendConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.api_key_env = "IDEOLENS_MISSING_KEY";
  try {
    OpenAICompletionsBackend b(c);
    FAIL("expected CredentialError");
  } catch (const CredentialError& e) {
    CHECK(std::string(e.what()).find("IDEOLENS_MISSING_KEY") != std::string::npos);
  }
}

TEST_CASE("echo request shape and token parsing") {
  KeyGuard key;
  FakeServer server;
  OpenAICompletionsBackend backend(config_for(server));
  const auto tokens = backend.echo_logprobs("Casey is a congressperson");
  REQUIRE(tokens.size() == 4);
  CHECK_FALSE(tokens[0].logprob.has_value());
  CHECK(tokens[3].text == " congressperson");
  CHECK(tokens[3].offset == 10);
  CHECK(*tokens[3].logprob == -0.5);
  CHECK(server.last_auth == "Bearer sk-test");
  CHECK(server.last_body.at("echo") == true);
  CHECK(server.last_body.at("max_tokens") == 0);
  CHECK(server.last_body.at("logprobs") == 0);
  CHECK(server.last_body.at("temperature") == 0);
  CHECK(server.last_body.at("model") == "fake-model");
  CHECK(backend.backend_id().find("fake-model") != std::string::npos);
}

TEST_CASE("retries 5xx and 429 with backoff") {
  KeyGuard key;
  FakeServer server;
  server.fail_first = 3;
  OpenAICompletionsBackend backend(config_for(server));
  CHECK(backend.echo_logprobs("a b").size() == 2);
  CHECK(server.calls == 4);

  FakeServer limited;
  limited.fail_first = 2;
  limited.fail_status = 429;
  OpenAICompletionsBackend b2(config_for(limited));
  CHECK(b2.echo_logprobs("a b").size() == 2);
  CHECK(limited.calls == 3);
}

TEST_CASE("gives up after max attempts") {
  KeyGuard key;
  FakeServer server;
  server.fail_first = 100;
  auto c = config_for(server);
  c.max_attempts = 3;
  OpenAICompletionsBackend backend(c);
  CHECK_THROWS_AS(backend.echo_logprobs("a b"), BackendError);
  CHECK(server.calls == 3);
}

TEST_CASE("HTTP 400 on max_tokens 0 falls back to one generated token") {
  KeyGuard key;
  FakeServer server;
  server.reject_zero_tokens = true;
  OpenAICompletionsBackend backend(config_for(server));
  const auto tokens = backend.echo_logprobs("a b c");
  CHECK(tokens.size() == 3);  // the generated token is dropped
  CHECK(server.last_body.at("max_tokens") == 1);
  const int before = server.calls;
  backend.echo_logprobs("a b");
  CHECK(server.calls == before + 1);  // fallback is remembered
}

TEST_CASE("transport failure is retryable and eventually thrown") {
  KeyGuard key;
  HttpBackendConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.api_key_env = "IDEOLENS_TEST_KEY";
  c.max_attempts = 2;
  c.initial_backoff = std::chrono::milliseconds(1);
  c.timeout = std::chrono::milliseconds(500);
  OpenAICompletionsBackend backend(c);
  try {
    backend.echo_logprobs("x");
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.retryable());
  }
}
