#include "ideolens/scorer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <thread>

#include "ideolens/error.hpp"

namespace ideolens {

namespace {

void check_tiling(const std::vector<TokenLogprob>& tokens, std::size_t text_size) {
  if (tokens.empty() || tokens.front().offset != 0)
    throw TokenBoundaryError("echoed tokens do not start at offset 0");
  for (std::size_t i = 1; i < tokens.size(); ++i)
    if (tokens[i].offset <= tokens[i - 1].offset)
      throw TokenBoundaryError("echoed token offsets are not increasing");
  if (tokens.back().offset >= text_size)
    throw TokenBoundaryError("echoed token offset past end of prompt");
}

double sum_span(const std::vector<TokenLogprob>& tokens, std::size_t text_size, std::size_t begin,
                std::size_t end) {
  check_tiling(tokens, text_size);
  double total = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto tok_begin = tokens[i].offset;
    const auto tok_end = i + 1 < tokens.size() ? tokens[i + 1].offset : text_size;
    if (tok_end <= begin || tok_begin >= end) continue;
    if (!tokens[i].logprob)
      throw TokenBoundaryError("variant span overlaps a token without a log-probability");
    total += *tokens[i].logprob;
    any = true;
  }
  if (!any) throw TokenBoundaryError("no echoed token overlaps the variant span");
  return total;
}

double sum_all(const std::vector<TokenLogprob>& tokens, std::size_t text_size) {
  check_tiling(tokens, text_size);
  double total = 0.0;
  for (const auto& t : tokens)
    if (t.logprob) total += *t.logprob;
  return total;
}

struct ScoredItem {
  ReformProbability result;
  std::size_t hits = 0;
};

ScoredItem score_item(const PromptItem& item, const VariantSet& set,
                      const ScoringBackend& backend, ScoreCache* cache) {
  const auto variants = set.variants();
  std::vector<double> log_probs;
  log_probs.reserve(variants.size());
  std::optional<ScoringMode> mode;
  std::size_t hits = 0;
  for (const auto& v : variants) {
    bool hit = false;
    const auto score = score_variant(item, v, backend, cache, &hit);
    if (mode && *mode != score.mode)
      throw std::logic_error("variants of one item scored in different modes");
    mode = score.mode;
    hits += hit ? 1 : 0;
    log_probs.push_back(score.log_prob);
  }
  return {reform_from_log_probs(item, set, log_probs, *mode), hits};
}

}  // namespace

ScoringMode select_mode(bool slot_at_end, Architecture arch) {
  if (arch == Architecture::EncoderDecoder) return ScoringMode::SpanInfill;
  return slot_at_end ? ScoringMode::Continuation : ScoringMode::FullSequence;
}

VariantScore score_variant(const PromptItem& item, std::string_view variant,
                           const ScoringBackend& backend, ScoreCache* cache, bool* cache_hit) {
  if (variant.empty()) throw ValidationError(fmt::format("{}: empty variant", item.id));
  const auto mode = select_mode(item.slot_at_end, backend.architecture());
  if (!backend.supports(mode))
    throw CapabilityError(fmt::format("backend {} does not support {} scoring",
                                      backend.backend_id(), to_string(mode)));

  VariantScore score{item.id, std::string(variant), 0.0, mode};
  CacheKey key;
  if (cache) {
    key = {backend.backend_id(), mode, sha256_hex(item.text_with_slot()), std::string(variant)};
    if (auto hit = cache->lookup(key)) {
      if (cache_hit) *cache_hit = true;
      score.log_prob = *hit;
      return score;
    }
  }
  if (cache_hit) *cache_hit = false;

  switch (mode) {
    case ScoringMode::Continuation: {
      const auto text = item.filled(variant);
      auto begin = item.rendered_prefix.size();
      if (begin > 0 && item.rendered_prefix.back() == ' ') --begin;
      const auto end = item.rendered_prefix.size() + variant.size();
      score.log_prob = sum_span(backend.echo_logprobs(text), text.size(), begin, end);
      break;
    }
    case ScoringMode::FullSequence: {
      const auto text = item.filled(variant);
      score.log_prob = sum_all(backend.echo_logprobs(text), text.size());
      break;
    }
    case ScoringMode::SpanInfill:
      score.log_prob =
          backend.span_infill_logprob(item.rendered_prefix, variant, item.rendered_suffix);
      break;
  }
  if (!std::isfinite(score.log_prob) || score.log_prob > 1e-9)
    throw BackendError(fmt::format("{}: backend returned invalid log-probability {} for '{}'",
                                   item.id, score.log_prob, variant),
                       false);
  if (cache) cache->insert(key, score.log_prob);
  return score;
}

std::vector<double> normalize_log_probs(std::span<const double> log_probs) {
  if (log_probs.empty()) return {};
  const double mx = *std::max_element(log_probs.begin(), log_probs.end());
  if (!std::isfinite(mx)) throw ValidationError("cannot normalize non-finite log-probabilities");
  double z = 0.0;
  for (double lp : log_probs) z += std::exp(lp - mx);
  const double lse = mx + std::log(z);
  std::vector<double> out;
  out.reserve(log_probs.size());
  for (double lp : log_probs) out.push_back(std::exp(lp - lse));
  return out;
}

ReformProbability reform_from_log_probs(const PromptItem& item, const VariantSet& set,
                                        std::span<const double> log_probs, ScoringMode mode) {
  const auto variants = set.variants();
  if (variants.size() != log_probs.size())
    throw ValidationError(fmt::format("{}: expected {} log-probabilities, got {}", item.id,
                                      variants.size(), log_probs.size()));
  const auto shares = normalize_log_probs(log_probs);
  ReformProbability r;
  r.item_id = item.id;
  r.mode = mode;
  r.choices_ordering = item.choices_ordering;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const bool reform = set.is_reform(variants[i]);
    r.per_variant.push_back({variants[i], log_probs[i], shares[i], reform});
    if (reform) r.p_reform += shares[i];
  }
  r.experiment = item.experiment;
  r.domain = item.domain;
  r.template_id = item.template_id;
  r.name = item.name;
  r.preamble_id = item.preamble_id;
  r.preamble_group = item.preamble_group;
  r.way_of_asking = item.way_of_asking;
  r.variant_set_id = item.variant_set_id;
  return r;
}

ReformProbability reform_probability(const PromptItem& item, const VariantSet& set,
                                     const ScoringBackend& backend, ScoreCache* cache) {
  return score_item(item, set, backend, cache).result;
}

ReformProbability average_choices_orderings(const std::vector<ReformProbability>& orderings,
                                            AveragingSpace space) {
  if (orderings.size() != 6)
    throw ValidationError(
        fmt::format("choices averaging needs 6 orderings, got {}", orderings.size()));
  std::vector<bool> seen(6, false);
  for (const auto& o : orderings) {
    if (!o.choices_ordering || *o.choices_ordering < 0 || *o.choices_ordering > 5 ||
        seen[*o.choices_ordering])
      throw ValidationError("choices averaging needs orderings 0..5 exactly once");
    seen[*o.choices_ordering] = true;
  }
  const auto& first = orderings.front();
  const auto cell = first.item_id.substr(0, first.item_id.rfind('/'));
  for (const auto& o : orderings) {
    if (o.item_id.substr(0, o.item_id.rfind('/')) != cell ||
        o.per_variant.size() != first.per_variant.size())
      throw ValidationError("choices orderings belong to different cells");
  }

  ReformProbability out = first;
  out.item_id = cell;
  out.choices_ordering.reset();
  out.orderings_averaged = 6;
  const auto n = static_cast<double>(orderings.size());
  const auto k = first.per_variant.size();

  for (std::size_t v = 0; v < k; ++v) {
    double lp = 0.0;
    for (const auto& o : orderings) lp += o.per_variant[v].log_prob;
    out.per_variant[v].log_prob = lp / n;
  }

  if (space == AveragingSpace::Probability) {
    double p = 0.0;
    for (const auto& o : orderings) p += o.p_reform;
    out.p_reform = p / n;
    double total = 0.0;
    for (std::size_t v = 0; v < k; ++v) {
      double s = 0.0;
      for (const auto& o : orderings) s += o.per_variant[v].share;
      out.per_variant[v].share = s / n;
      total += s / n;
    }
    for (auto& pv : out.per_variant) pv.share /= total;
  } else {
    std::vector<double> mean_log(k, 0.0);
    for (std::size_t v = 0; v < k; ++v) {
      for (const auto& o : orderings) mean_log[v] += std::log(o.per_variant[v].share);
      mean_log[v] /= n;
    }
    const auto shares = normalize_log_probs(mean_log);
    out.p_reform = 0.0;
    for (std::size_t v = 0; v < k; ++v) {
      out.per_variant[v].share = shares[v];
      if (out.per_variant[v].reform) out.p_reform += shares[v];
    }
  }
  return out;
}

SuiteOutcome run_suite(const std::vector<PromptItem>& items,
                       const std::vector<VariantSet>& variant_sets, const ScoringBackend& backend,
                       ScoreCache* cache, const SuiteOptions& options) {
  std::map<std::string, const VariantSet*> sets;
  for (const auto& s : variant_sets) sets[s.id] = &s;

  std::vector<std::optional<ScoredItem>> scored(items.size());
  std::vector<std::optional<std::string>> errors(items.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    for (;;) {
      if (options.strict && abort.load()) return;
      const auto i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        auto it = sets.find(items[i].variant_set_id);
        if (it == sets.end())
          throw ValidationError(fmt::format("unknown variant set '{}'", items[i].variant_set_id));
        scored[i] = score_item(items[i], *it->second, backend, cache);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        abort.store(true);
      }
    }
  };

  const auto threads = static_cast<std::size_t>(std::max(1, options.concurrency_limit));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < std::min(threads, items.size()); ++t) pool.emplace_back(worker);
    worker();
  }

  SuiteOutcome outcome;
  std::map<std::string, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (errors[i]) outcome.failures.push_back({items[i].id, *errors[i]});
    cells[items[i].cell_id()].push_back(i);
  }
  std::sort(outcome.failures.begin(), outcome.failures.end(),
            [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  if (options.strict && !outcome.failures.empty())
    throw ScoringError(outcome.failures.front().item_id,
                       fmt::format("{}: {}", outcome.failures.front().item_id,
                                   outcome.failures.front().message));

  for (const auto& [cell, indices] : cells) {
    std::vector<ReformProbability> parts;
    bool complete = true;
    for (auto i : indices) {
      if (!scored[i]) {
        complete = false;
        continue;
      }
      outcome.variant_lookups += scored[i]->result.per_variant.size();
      outcome.cache_hits += scored[i]->hits;
      parts.push_back(scored[i]->result);
    }
    if (!complete) continue;
    ReformProbability r;
    if (parts.size() == 1 && !parts.front().choices_ordering) {
      r = std::move(parts.front());
    } else {
      try {
        r = average_choices_orderings(parts, options.averaging);
      } catch (const ValidationError& e) {
        outcome.failures.push_back({cell, e.what()});
        continue;
      }
    }
    r.model = options.model;
    outcome.results.push_back(std::move(r));
  }
  return outcome;
}

nlohmann::ordered_json result_to_json(const ReformProbability& r) {
  nlohmann::ordered_json per_variant = nlohmann::ordered_json::object();
  nlohmann::ordered_json log_probs = nlohmann::ordered_json::object();
  nlohmann::ordered_json reform = nlohmann::ordered_json::array();
  for (const auto& v : r.per_variant) {
    per_variant[v.variant] = v.share;
    log_probs[v.variant] = v.log_prob;
    if (v.reform) reform.push_back(v.variant);
  }
  nlohmann::ordered_json j;
  j["item_id"] = r.item_id;
  j["model"] = r.model;
  j["experiment"] = static_cast<int>(r.experiment);
  j["domain"] = to_string(r.domain);
  j["template_id"] = r.template_id;
  j["name"] = {{"name", r.name.name}, {"gender_class", to_string(r.name.gender_class)}};
  j["preamble_id"] = r.preamble_id;
  j["preamble_group"] = to_string(r.preamble_group);
  j["way_of_asking"] =
      r.way_of_asking ? nlohmann::ordered_json(r.way_of_asking->label()) : nlohmann::ordered_json();
  j["variant_set_id"] = r.variant_set_id;
  j["mode"] = to_string(r.mode);
  j["orderings_averaged"] = r.orderings_averaged;
  j["choices_ordering"] = r.choices_ordering ? nlohmann::ordered_json(*r.choices_ordering)
                                             : nlohmann::ordered_json();
  j["p_reform"] = r.p_reform;
  j["reform_variants"] = reform;
  j["per_variant"] = per_variant;
  j["log_probs"] = log_probs;
  return j;
}

ReformProbability result_from_json(const nlohmann::ordered_json& j) {
  ReformProbability r;
  r.item_id = j.at("item_id").get<std::string>();
  r.model = j.at("model").get<std::string>();
  const int e = j.at("experiment").get<int>();
  if (e != 1 && e != 2) throw ParseError("experiment must be 1 or 2");
  r.experiment = static_cast<Experiment>(e);
  r.domain = parse_domain(j.at("domain").get<std::string>());
  r.template_id = j.at("template_id").get<std::string>();
  r.name = {j.at("name").at("name").get<std::string>(),
            parse_gender_class(j.at("name").at("gender_class").get<std::string>())};
  r.preamble_id = j.at("preamble_id").get<std::string>();
  r.preamble_group = parse_preamble_group(j.at("preamble_group").get<std::string>());
  if (!j.at("way_of_asking").is_null())
    r.way_of_asking = WayOfAsking::parse(j.at("way_of_asking").get<std::string>());
  r.variant_set_id = j.at("variant_set_id").get<std::string>();
  r.mode = parse_scoring_mode(j.at("mode").get<std::string>());
  r.orderings_averaged = j.at("orderings_averaged").get<int>();
  if (!j.at("choices_ordering").is_null()) r.choices_ordering = j.at("choices_ordering").get<int>();
  r.p_reform = j.at("p_reform").get<double>();
  const auto& reform = j.at("reform_variants");
  const auto& logs = j.at("log_probs");
  for (const auto& [variant, share] : j.at("per_variant").items()) {
    const bool is_reform = std::find(reform.begin(), reform.end(), variant) != reform.end();
    r.per_variant.push_back({variant, logs.at(variant).get<double>(), share.get<double>(), is_reform});
  }
  return r;
}

void write_results(const std::filesystem::path& path,
                   const std::vector<ReformProbability>& results) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", tmp));
    for (const auto& r : results) out << result_to_json(r).dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

std::vector<ReformProbability> read_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError(fmt::format("cannot open results {}", path.string()));
  std::vector<ReformProbability> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(result_from_json(nlohmann::ordered_json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

}  // namespace ideolens
