#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ideolens/backend.hpp"
#include "ideolens/error.hpp"

namespace ideolens {

namespace {

double unit(std::uint64_t x) { return static_cast<double>(x >> 11) * 0x1.0p-53; }

constexpr std::uint64_t kFnvPrime = 1099511628211ull;

}  // namespace

std::string_view to_string(ScoringMode m) {
  switch (m) {
    case ScoringMode::Continuation:
      return "continuation";
    case ScoringMode::FullSequence:
      return "full-sequence";
    case ScoringMode::SpanInfill:
      return "span-infill";
  }
  return "?";
}

ScoringMode parse_scoring_mode(std::string_view s) {
  for (auto m : {ScoringMode::Continuation, ScoringMode::FullSequence, ScoringMode::SpanInfill})
    if (to_string(m) == s) return m;
  throw ParseError(fmt::format("unknown scoring mode '{}'", s));
}

std::string_view to_string(Architecture a) {
  return a == Architecture::Autoregressive ? "autoregressive" : "encoder-decoder";
}

Architecture parse_architecture(std::string_view s) {
  if (s == "autoregressive") return Architecture::Autoregressive;
  if (s == "encoder-decoder") return Architecture::EncoderDecoder;
  throw ParseError(fmt::format("unknown architecture '{}'", s));
}

bool ScoringBackend::supports(ScoringMode mode) const {
  if (architecture() == Architecture::EncoderDecoder) return mode == ScoringMode::SpanInfill;
  return mode != ScoringMode::SpanInfill;
}

std::vector<TokenLogprob> ScoringBackend::echo_logprobs(std::string_view) const {
  throw CapabilityError(fmt::format("backend {} cannot echo token logprobs", backend_id()));
}

double ScoringBackend::span_infill_logprob(std::string_view, std::string_view,
                                           std::string_view) const {
  throw CapabilityError(fmt::format("backend {} cannot score span infills", backend_id()));
}

std::uint64_t MockBackend::fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

MockBackend::MockBackend(MockConfig config) : config_(config) {
  if (config_.context_states < 1) throw ConfigError("mock context_states must be >= 1");
  std::mt19937_64 gen(config_.seed);
  std::array<double, 256> base;
  for (auto& b : base) b = 4.0 * unit(gen()) - 2.0;

  table_.resize(config_.context_states);
  for (int k = 0; k < config_.context_states; ++k) {
    std::array<double, 256> logits = base;
    if (k > 0)
      for (auto& l : logits) l += 0.5 * (2.0 * unit(gen()) - 1.0);
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    for (int b = 0; b < 256; ++b) table_[k][b] = logits[b] - lse;
  }
}

std::string MockBackend::backend_id() const {
  return fmt::format("mock:seed={}:k={}:{}", config_.seed, config_.context_states,
                     to_string(config_.architecture));
}

std::vector<TokenLogprob> MockBackend::echo_logprobs(std::string_view text) const {
  if (config_.architecture != Architecture::Autoregressive) return ScoringBackend::echo_logprobs(text);
  count_request();
  std::vector<TokenLogprob> tokens;
  tokens.reserve(text.size());
  std::uint64_t h = 14695981039346656037ull;
  const auto k = static_cast<std::uint64_t>(config_.context_states);
  for (std::size_t t = 0; t < text.size(); ++t) {
    const auto byte = static_cast<unsigned char>(text[t]);
    tokens.push_back({std::string(1, text[t]), t, table_[h % k][byte]});
    h = fnv1a(text.substr(t, 1), h);
  }
  return tokens;
}

double MockBackend::span_infill_logprob(std::string_view prefix, std::string_view span,
                                        std::string_view suffix) const {
  if (config_.architecture != Architecture::EncoderDecoder)
    return ScoringBackend::span_infill_logprob(prefix, span, suffix);
  count_request();
  std::uint64_t h = fnv1a(prefix);
  h = fnv1a("\x1f", h);
  h = fnv1a(suffix, h);
  h = fnv1a("\x1f", h);
  const auto k = static_cast<std::uint64_t>(config_.context_states);
  double total = 0.0;
  for (std::size_t t = 0; t < span.size(); ++t) {
    total += table_[h % k][static_cast<unsigned char>(span[t])];
    h = fnv1a(span.substr(t, 1), h);
  }
  return total;
}

}  // namespace ideolens
