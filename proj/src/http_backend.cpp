#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <fmt/format.h>

#include <cstdlib>
#include <nlohmann/json.hpp>
#include <regex>
#include <thread>

#include "ideolens/backend.hpp"
#include "ideolens/error.hpp"

namespace ideolens {

OpenAICompletionsBackend::OpenAICompletionsBackend(HttpBackendConfig config)
    : config_(std::move(config)) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw CredentialError(
        fmt::format("environment variable {} is not set", config_.api_key_env));
  api_key_ = key;

  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.base_url, m, url_re))
    throw ConfigError(fmt::format("backend base_url '{}' is not an http(s) URL", config_.base_url));
  scheme_host_ = m[1].str();
  path_prefix_ = m[2].matched ? m[2].str() : "";
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (config_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

std::string OpenAICompletionsBackend::backend_id() const {
  return fmt::format("openai:{}{}:{}", scheme_host_, path_prefix_, config_.model);
}

std::vector<TokenLogprob> OpenAICompletionsBackend::request_once(std::string_view text,
                                                                 int max_tokens) const {
  httplib::Client client(scheme_host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  client.set_bearer_token_auth(api_key_);

  const nlohmann::json body{{"model", config_.model}, {"prompt", std::string(text)},
                            {"max_tokens", max_tokens}, {"echo", true},
                            {"logprobs", 0},          {"temperature", 0}};
  auto res = client.Post(path_prefix_ + "/completions", body.dump(), "application/json");
  if (!res)
    throw BackendError(fmt::format("transport error: {}", httplib::to_string(res.error())), true);
  if (res->status == 429 || res->status >= 500)
    throw BackendError(fmt::format("HTTP {}: {}", res->status, res->body), true);
  if (res->status != 200)
    throw BackendError(fmt::format("HTTP {}: {}", res->status, res->body), false);

  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(res->body);
    const auto& lp = doc.at("choices").at(0).at("logprobs");
    const auto& tokens = lp.at("tokens");
    const auto& logprobs = lp.at("token_logprobs");
    const auto& offsets = lp.at("text_offset");
    if (tokens.size() != logprobs.size() || tokens.size() != offsets.size())
      throw BackendError("logprobs arrays differ in length", false);
    std::vector<TokenLogprob> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      TokenLogprob t;
      t.text = tokens[i].get<std::string>();
      t.offset = offsets[i].get<std::size_t>();
      if (t.offset >= text.size()) break;  // generated continuation, not part of the prompt
      if (!logprobs[i].is_null()) t.logprob = logprobs[i].get<double>();
      out.push_back(std::move(t));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(fmt::format("malformed completions response: {}", e.what()), false);
  }
}

std::vector<TokenLogprob> OpenAICompletionsBackend::echo_logprobs(std::string_view text) const {
  auto backoff = config_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      const int max_tokens = generation_fallback_.load() ? 1 : 0;
      count_request();
      try {
        return request_once(text, max_tokens);
      } catch (const BackendError& e) {
        // Some servers refuse zero-length generations; retry once with one token.
        if (max_tokens == 0 && !e.retryable() && std::string_view(e.what()).starts_with("HTTP 400")) {
          generation_fallback_.store(true);
          count_request();
          return request_once(text, 1);
        }
        throw;
      }
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt >= config_.max_attempts) throw;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
  }
}

}  // namespace ideolens
