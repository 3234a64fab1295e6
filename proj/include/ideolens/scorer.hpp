#pragma once

// Variant scoring and reform-probability normalization.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ideolens/backend.hpp"
#include "ideolens/cache.hpp"
#include "ideolens/prompts.hpp"

namespace ideolens {

/// EncoderDecoder -> SpanInfill; otherwise Continuation when the slot ends the
/// prompt, FullSequence when text follows it.
ScoringMode select_mode(bool slot_at_end, Architecture arch);

struct VariantScore {
  std::string item_id;
  std::string variant;
  double log_prob = 0.0;  // natural log
  ScoringMode mode = ScoringMode::Continuation;
};

/// Scores one variant in the item's slot. Cache hits skip the backend.
/// Continuation sums the tokens overlapping the variant's span, where the span
/// starts at the separating space when the prefix ends with one. FullSequence
/// sums every token of the filled prompt that carries a log-probability.
VariantScore score_variant(const PromptItem& item, std::string_view variant,
                           const ScoringBackend& backend, ScoreCache* cache = nullptr,
                           bool* cache_hit = nullptr);

/// Numerically stable softmax of log-probabilities.
std::vector<double> normalize_log_probs(std::span<const double> log_probs);

struct VariantShare {
  std::string variant;
  double log_prob = 0.0;  // raw log p(v|i); mean over orderings after averaging
  double share = 0.0;     // normalized probability
  bool reform = false;

  friend bool operator==(const VariantShare&, const VariantShare&) = default;
};

struct ReformProbability {
  std::string item_id;
  double p_reform = 0.0;
  std::vector<VariantShare> per_variant;
  ScoringMode mode = ScoringMode::Continuation;
  int orderings_averaged = 1;
  std::optional<int> choices_ordering;

  // condition metadata copied from the item
  std::string model;
  Experiment experiment = Experiment::Exp1;
  Domain domain = Domain::RoleNoun;
  std::string template_id;
  NameEntry name;
  std::string preamble_id;
  PreambleGroup preamble_group = PreambleGroup::Null;
  std::optional<WayOfAsking> way_of_asking;
  std::string variant_set_id;
};

/// Builds a ReformProbability from one log-probability per variant of `set`
/// (same order as set.variants()).
ReformProbability reform_from_log_probs(const PromptItem& item, const VariantSet& set,
                                        std::span<const double> log_probs, ScoringMode mode);

ReformProbability reform_probability(const PromptItem& item, const VariantSet& set,
                                     const ScoringBackend& backend, ScoreCache* cache = nullptr);

enum class AveragingSpace { Probability, Log };

/// Collapses the six Choices orderings of one logical cell. Probability space
/// averages p_reform and shares arithmetically; Log space averages log shares
/// and renormalizes.
ReformProbability average_choices_orderings(const std::vector<ReformProbability>& orderings,
                                            AveragingSpace space = AveragingSpace::Probability);

struct SuiteOptions {
  int concurrency_limit = 1;
  bool strict = false;
  AveragingSpace averaging = AveragingSpace::Probability;
  std::string model;  // label copied into every result
};

struct ItemFailure {
  std::string item_id;
  std::string message;
};

struct SuiteOutcome {
  std::vector<ReformProbability> results;  // one per logical cell, sorted by item id
  std::vector<ItemFailure> failures;       // sorted by item id
  std::size_t variant_lookups = 0;
  std::size_t cache_hits = 0;
  double cache_hit_rate() const {
    return variant_lookups == 0 ? 1.0 : static_cast<double>(cache_hits) / variant_lookups;
  }
};

/// Scores every item with up to `concurrency_limit` requests in flight. Failed
/// items are collected; in strict mode the first failing item (by id) is
/// rethrown as ScoringError after in-flight work drains.
SuiteOutcome run_suite(const std::vector<PromptItem>& items,
                       const std::vector<VariantSet>& variant_sets, const ScoringBackend& backend,
                       ScoreCache* cache, const SuiteOptions& options);

/// JSON object with condition metadata; `per_variant` and `log_probs` keep variant order.
nlohmann::ordered_json result_to_json(const ReformProbability& r);
ReformProbability result_from_json(const nlohmann::ordered_json& j);

void write_results(const std::filesystem::path& path, const std::vector<ReformProbability>& results);
std::vector<ReformProbability> read_results(const std::filesystem::path& path);

}  // namespace ideolens
