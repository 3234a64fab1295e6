#pragma once

// Token-logprob backends the scorer runs against.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ideolens {

enum class ScoringMode { Continuation, FullSequence, SpanInfill };
enum class Architecture { Autoregressive, EncoderDecoder };

std::string_view to_string(ScoringMode m);  // "continuation" | "full-sequence" | "span-infill"
ScoringMode parse_scoring_mode(std::string_view s);
std::string_view to_string(Architecture a);  // "autoregressive" | "encoder-decoder"
Architecture parse_architecture(std::string_view s);

/// One echoed token. `offset` is the byte offset of the token's first byte in the
/// scored text. `logprob` is empty for the first token of an echo (no context).
struct TokenLogprob {
  std::string text;
  std::size_t offset = 0;
  std::optional<double> logprob;
};

class ScoringBackend {
 public:
  virtual ~ScoringBackend() = default;

  /// Stable identifier; part of every cache key.
  virtual std::string backend_id() const = 0;
  virtual Architecture architecture() const = 0;
  bool supports(ScoringMode mode) const;

  /// Autoregressive: per-token log-probabilities of `text`, each conditioned on
  /// the preceding tokens. Tokens tile the text in order.
  virtual std::vector<TokenLogprob> echo_logprobs(std::string_view text) const;

  /// Encoder-decoder: log p(span | prefix <sentinel> suffix).
  virtual double span_infill_logprob(std::string_view prefix, std::string_view span,
                                     std::string_view suffix) const;

  /// Requests that reached the model (not counting retries).
  std::uint64_t request_count() const { return requests_.load(); }

 protected:
  void count_request() const { requests_.fetch_add(1, std::memory_order_relaxed); }

 private:
  mutable std::atomic<std::uint64_t> requests_{0};
};

struct MockConfig {
  std::uint64_t seed = 0;
  int context_states = 8;
  Architecture architecture = Architecture::Autoregressive;
};

/// Deterministic offline backend with a closed-form byte model.
///
/// Every byte is one token. Tables come from `std::mt19937_64(seed)`; with
/// u(x) = (x >> 11) * 2^-53 the first 256 draws give base[b] = 4u - 2, and the
/// next (K-1)*256 draws give pert[k][b] = 2u - 1 for k = 1..K-1, row-major.
/// State k uses logits base[b] (k = 0) or base[b] + 0.5 * pert[k][b], and
/// log p_k(b) = logit_k[b] - logsumexp_b'(logit_k[b']).
///
/// The state of a byte is FNV-1a-64 of all preceding bytes, modulo K. For span
/// infill the preceding context is `prefix + '\x1f' + suffix + '\x1f' + span[0..t)`.
/// With K = 1 the model is a pure byte unigram.
class MockBackend final : public ScoringBackend {
 public:
  explicit MockBackend(MockConfig config = {});

  std::string backend_id() const override;
  Architecture architecture() const override { return config_.architecture; }
  std::vector<TokenLogprob> echo_logprobs(std::string_view text) const override;
  double span_infill_logprob(std::string_view prefix, std::string_view span,
                             std::string_view suffix) const override;

  double byte_logprob(int state, unsigned char byte) const { return table_[state][byte]; }
  int context_states() const { return config_.context_states; }

  static std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 14695981039346656037ull);

 private:
  MockConfig config_;
  std::vector<std::array<double, 256>> table_;
};

struct HttpBackendConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
};

/// OpenAI-compatible completions endpoint scored with echo + logprobs.
/// Requests `max_tokens: 0`; if the server rejects that with HTTP 400 the
/// backend switches to `max_tokens: 1` and drops the generated token.
class OpenAICompletionsBackend final : public ScoringBackend {
 public:
  /// Reads the API key from the configured environment variable now.
  /// Throws CredentialError naming the variable when it is unset.
  explicit OpenAICompletionsBackend(HttpBackendConfig config);

  std::string backend_id() const override;
  Architecture architecture() const override { return Architecture::Autoregressive; }
  std::vector<TokenLogprob> echo_logprobs(std::string_view text) const override;

 private:
  std::vector<TokenLogprob> request_once(std::string_view text, int max_tokens) const;

  HttpBackendConfig config_;
  std::string api_key_;
  std::string scheme_host_;
  std::string path_prefix_;
  mutable std::atomic<bool> generation_fallback_{false};
};

}  // namespace ideolens
