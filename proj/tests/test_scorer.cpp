#include <doctest.h>

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <random>

#include "ideolens/error.hpp"
#include "ideolens/scorer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace ideolens;

namespace {

VariantSet congress() {
  VariantSet s;
  s.id = "congressperson";
  s.domain = Domain::RoleNoun;
  s.reform_variants = {"congressperson"};
  s.feminine_variant = "congresswoman";
  s.masculine_variant = "congressman";
  s.determiner = "a";
  return s;
}

VariantSet reflexive() {
  VariantSet s;
  s.id = "reflexive";
  s.domain = Domain::Pronoun;
  s.reform_variants = {"themself", "themselves"};
  s.feminine_variant = "herself";
  s.masculine_variant = "himself";
  s.pronoun_form = PronounForm::Reflexive;
  return s;
}

PromptItem item(std::string id, std::string prefix, std::string suffix = "",
                std::string set_id = "congressperson") {
  PromptItem i;
  i.id = std::move(id);
  i.template_id = "t";
  i.name = {"Casey", GenderClass::Neutral};
  i.preamble_id = "meta-1";
  i.preamble_group = PreambleGroup::PositiveMetaling;
  i.variant_set_id = std::move(set_id);
  i.rendered_prefix = std::move(prefix);
  i.rendered_suffix = std::move(suffix);
  i.slot_at_end = is_slot_at_end(i.rendered_suffix);
  return i;
}

/// Unigram backend with an explicit per-byte table; counts echo calls.
class TableBackend final : public ScoringBackend {
 public:
  explicit TableBackend(double fill = -5.0) { table.fill(fill); }
  std::string backend_id() const override { return "table"; }
  Architecture architecture() const override { return Architecture::Autoregressive; }
  std::vector<TokenLogprob> echo_logprobs(std::string_view text) const override {
    count_request();
    std::vector<TokenLogprob> out;
    for (std::size_t t = 0; t < text.size(); ++t)
      out.push_back({std::string(1, text[t]), t, table[static_cast<unsigned char>(text[t])]});
    return out;
  }
  std::array<double, 256> table{};
};

/// Mock that fails whenever the prompt mentions `poison`.
class FailingBackend final : public ScoringBackend {
 public:
  explicit FailingBackend(std::string poison) : poison_(std::move(poison)) {}
  std::string backend_id() const override { return inner_.backend_id(); }
  Architecture architecture() const override { return Architecture::Autoregressive; }
  std::vector<TokenLogprob> echo_logprobs(std::string_view text) const override {
    count_request();
    if (text.find(poison_) != std::string_view::npos) throw BackendError("boom", false);
    return inner_.echo_logprobs(text);
  }

 private:
  MockBackend inner_{{3, 8, Architecture::Autoregressive}};
  std::string poison_;
};

std::vector<PromptItem> small_suite() {
  std::vector<PromptItem> items;
  for (const char* name : {"Casey", "Alex", "Jordan", "Robin", "Sam"})
    for (int p = 0; p < 3; ++p) {
      auto i = item(fmt::format("exp1/role-nouns/congressperson/{}/meta-{}", name, p),
                    fmt::format("Preamble {}. {} is a ", p, name), ".");
      i.name.name = name;
      items.push_back(i);
    }
  return items;
}

}  // namespace

TEST_CASE("continuation scoring sums the variant bytes and the separating space") {
  MockBackend mock({42, 8, Architecture::Autoregressive});
  oracle::MockModel ref(42, 8);
  const auto i = item("a", "Casey is a ");
  const auto s = score_variant(i, "congressperson", mock);
  CHECK(s.mode == ScoringMode::Continuation);
  const std::string text = "Casey is a congressperson";
  CHECK(s.log_prob == doctest::Approx(ref.range(text, 10, text.size())).epsilon(1e-13));
  CHECK(s.log_prob < 0.0);
}

TEST_CASE("continuation on a unigram mock is the analytic byte sum") {
  MockBackend mock({11, 1, Architecture::Autoregressive});
  double expected = 0.0;
  for (char c : std::string(" congressperson"))
    expected += mock.byte_logprob(0, static_cast<unsigned char>(c));
  CHECK(score_variant(item("a", "Casey is a "), "congressperson", mock).log_prob ==
        doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("full-sequence scoring covers every token and is deterministic") {
  MockBackend mock({42, 8, Architecture::Autoregressive});
  oracle::MockModel ref(42, 8);
  const auto i = item("b", "Hayden left ", " computer on.", "possessive");
  REQUIRE_FALSE(i.slot_at_end);
  const auto a = score_variant(i, "their", mock);
  const auto b = score_variant(i, "their", mock);
  CHECK(a.mode == ScoringMode::FullSequence);
  CHECK(a.log_prob == b.log_prob);
  const std::string text = "Hayden left their computer on.";
  CHECK(a.log_prob == doctest::Approx(ref.range(text, 0, text.size())).epsilon(1e-13));
}

TEST_CASE("encoder-decoder backends score by span infill in every slot position") {
  MockBackend mock({99, 8, Architecture::EncoderDecoder});
  oracle::MockModel ref(99, 8);
  const auto mid = item("c", "Hayden left ", " computer on.", "possessive");
  const auto end = item("d", "Casey is a ", ".");
  const auto a = score_variant(mid, "their", mock);
  const auto b = score_variant(end, "congressperson", mock);
  CHECK(a.mode == ScoringMode::SpanInfill);
  CHECK(b.mode == ScoringMode::SpanInfill);
  CHECK(a.log_prob == doctest::Approx(ref.infill("Hayden left ", "their", " computer on.")));
  CHECK(b.log_prob == doctest::Approx(ref.infill("Casey is a ", "congressperson", ".")));
}

TEST_CASE("mode selection") {
  CHECK(select_mode(true, Architecture::Autoregressive) == ScoringMode::Continuation);
  CHECK(select_mode(false, Architecture::Autoregressive) == ScoringMode::FullSequence);
  CHECK(select_mode(true, Architecture::EncoderDecoder) == ScoringMode::SpanInfill);
  CHECK(select_mode(false, Architecture::EncoderDecoder) == ScoringMode::SpanInfill);
}

TEST_CASE("empty variant is rejected") {
  MockBackend mock;
  CHECK_THROWS_AS(score_variant(item("a", "Casey is a "), "", mock), ValidationError);
}

TEST_CASE("positive or non-finite log-probabilities are backend errors") {
  TableBackend bad(0.5);
  CHECK_THROWS_AS(score_variant(item("a", "Casey is a "), "x", bad), BackendError);
  TableBackend nan(std::nan(""));
  CHECK_THROWS_AS(score_variant(item("a", "Casey is a "), "x", nan), BackendError);
}

TEST_CASE("normalization of raw probabilities") {
  const auto set = congress();
  const std::vector<double> lp{std::log(0.2), std::log(0.3), std::log(0.5)};
  const auto r = reform_from_log_probs(item("a", "x "), set, lp, ScoringMode::Continuation);
  CHECK(r.p_reform == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(r.per_variant[0].variant == "congressperson");
  CHECK(r.per_variant[0].reform);
  CHECK_FALSE(r.per_variant[2].reform);
}

TEST_CASE("reflexive has two reform variants") {
  const auto set = reflexive();
  const std::vector<double> lp{std::log(0.1), std::log(0.2), std::log(0.3), std::log(0.4)};
  const auto r =
      reform_from_log_probs(item("a", "x ", "", "reflexive"), set, lp, ScoringMode::Continuation);
  CHECK(r.p_reform == doctest::Approx(0.3).epsilon(1e-12));
  int reform = 0;
  for (const auto& v : r.per_variant) reform += v.reform;
  CHECK(reform == 2);
}

TEST_CASE("normalization does not underflow") {
  const std::vector<double> lp{-1000.0, -1001.0, -1002.0};
  const auto p = normalize_log_probs(lp);
  // e^0, e^-1, e^-2 over their sum
  const double z = 1.0 + std::exp(-1.0) + std::exp(-2.0);
  CHECK(p[0] == doctest::Approx(1.0 / z).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-12));
  CHECK(p[2] == doctest::Approx(std::exp(-2.0) / z).epsilon(1e-12));
  CHECK(p[0] == doctest::Approx(0.6652).epsilon(1e-4));
  CHECK(p[1] == doctest::Approx(0.2447).epsilon(1e-3));
  CHECK(p[2] == doctest::Approx(0.0900).epsilon(1e-3));
}

TEST_CASE("wrong number of log-probabilities is rejected") {
  const std::vector<double> lp{-1.0, -2.0};
  CHECK_THROWS_AS(reform_from_log_probs(item("a", "x "), congress(), lp, ScoringMode::Continuation),
                  ValidationError);
}

TEST_CASE("shares sum to one over random inputs") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(-200.0, 0.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> lp{u(gen), u(gen), u(gen), u(gen)};
    double s = 0.0;
    for (double p : normalize_log_probs(lp)) s += p;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("raising a variant's unigram weight strictly raises its share") {
  // 'p' occurs only in the reform variant.
  TableBackend backend;
  const auto set = congress();
  const auto i = item("a", "Casey is a ");
  double previous = -1.0;
  for (double w : {-8.0, -6.0, -4.0, -2.0, -1.0, -0.1}) {
    backend.table[static_cast<unsigned char>('p')] = w;
    const double share = reform_probability(i, set, backend).per_variant[0].share;
    CHECK(share > previous);
    previous = share;
  }
}

namespace {

ReformProbability ordering(int k, double p, std::string cell = "exp2/x") {
  ReformProbability r;
  r.item_id = fmt::format("{}/{}", cell, k);
  r.choices_ordering = k;
  r.p_reform = p;
  r.per_variant = {{"congressperson", std::log(p), p, true},
                   {"congresswoman", std::log((1 - p) / 2), (1 - p) / 2, false},
                   {"congressman", std::log((1 - p) / 2), (1 - p) / 2, false}};
  return r;
}

}  // namespace

TEST_CASE("choices averaging") {
  std::vector<ReformProbability> same;
  for (int k = 0; k < 6; ++k) same.push_back(ordering(k, 0.4));
  auto r = average_choices_orderings(same);
  CHECK(r.p_reform == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(r.item_id == "exp2/x");
  CHECK(r.orderings_averaged == 6);
  CHECK_FALSE(r.choices_ordering.has_value());

  std::vector<ReformProbability> spread;
  for (int k = 0; k < 6; ++k) spread.push_back(ordering(k, 0.1 * (k + 1)));
  r = average_choices_orderings(spread);
  CHECK(r.p_reform == doctest::Approx(0.35).epsilon(1e-12));
  double total = 0.0;
  for (const auto& v : r.per_variant) total += v.share;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  const auto log_space = average_choices_orderings(spread, AveragingSpace::Log);
  total = 0.0;
  for (const auto& v : log_space.per_variant) total += v.share;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(log_space.p_reform < 0.35);  // geometric mean below arithmetic

  spread.pop_back();
  CHECK_THROWS_AS(average_choices_orderings(spread), ValidationError);
  spread.push_back(ordering(4, 0.5));
  CHECK_THROWS_AS(average_choices_orderings(spread), ValidationError);
  spread.back() = ordering(5, 0.5, "exp2/y");
  CHECK_THROWS_AS(average_choices_orderings(spread), ValidationError);
}

TEST_CASE("run_suite results are sorted, normalized and carry the model label") {
  MockBackend mock({7, 8, Architecture::Autoregressive});
  auto items = small_suite();
  std::reverse(items.begin(), items.end());
  const auto out = run_suite(items, {congress()}, mock, nullptr, {4, false, {}, "mock-7"});
  REQUIRE(out.results.size() == items.size());
  CHECK(out.failures.empty());
  for (std::size_t i = 1; i < out.results.size(); ++i)
    CHECK(out.results[i - 1].item_id < out.results[i].item_id);
  for (const auto& r : out.results) {
    CHECK(r.model == "mock-7");
    double s = 0.0;
    for (const auto& v : r.per_variant) s += v.share;
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
}

TEST_CASE("warm cache gives identical results with zero backend calls") {
  test::TempDir dir;
  const auto items = small_suite();
  SuiteOutcome cold;
  {
    MockBackend mock({7, 8, Architecture::Autoregressive});
    ScoreCache cache(dir / "cache/scores.jsonl");
    cold = run_suite(items, {congress()}, mock, &cache, {3, false, {}, "m"});
    CHECK(mock.request_count() == items.size() * 3);
    CHECK(cold.cache_hits == 0);
  }
  MockBackend mock({7, 8, Architecture::Autoregressive});
  ScoreCache cache(dir / "cache/scores.jsonl");
  CHECK(cache.size() == items.size() * 3);
  const auto warm = run_suite(items, {congress()}, mock, &cache, {3, false, {}, "m"});
  CHECK(mock.request_count() == 0);
  CHECK(warm.cache_hit_rate() == 1.0);
  REQUIRE(warm.results.size() == cold.results.size());
  for (std::size_t i = 0; i < warm.results.size(); ++i) {
    CHECK(warm.results[i].p_reform == cold.results[i].p_reform);
    CHECK(warm.results[i].per_variant == cold.results[i].per_variant);
  }
}

TEST_CASE("cache keys separate backends") {
  test::TempDir dir;
  ScoreCache cache(dir / "c.jsonl");
  const auto i = item("a", "Casey is a ");
  MockBackend a({1, 8, Architecture::Autoregressive});
  MockBackend b({2, 8, Architecture::Autoregressive});
  const auto sa = score_variant(i, "congressperson", a, &cache);
  bool hit = true;
  const auto sb = score_variant(i, "congressperson", b, &cache, &hit);
  CHECK_FALSE(hit);
  CHECK(sa.log_prob != sb.log_prob);
  score_variant(i, "congressperson", a, &cache, &hit);
  CHECK(hit);
}

TEST_CASE("a torn cache tail is ignored and later appends still parse") {
  test::TempDir dir;
  const auto path = dir / "c.jsonl";
  const auto i = item("a", "Casey is a ");
  MockBackend mock({1, 8, Architecture::Autoregressive});
  {
    ScoreCache cache(path);
    score_variant(i, "congressperson", mock, &cache);
  }
  std::ofstream(path, std::ios::binary | std::ios::app) << R"({"backend_id":"mock:se)";
  {
    ScoreCache cache(path);
    CHECK(cache.size() == 1);
    score_variant(i, "congressman", mock, &cache);
  }
  ScoreCache cache(path);
  CHECK(cache.size() == 2);
}

TEST_CASE("failures are collected, or abort in strict mode with the item id") {
  FailingBackend backend("Jordan");
  const auto items = small_suite();
  const auto out = run_suite(items, {congress()}, backend, nullptr, {2, false, {}, "m"});
  CHECK(out.results.size() == items.size() - 3);
  REQUIRE(out.failures.size() == 3);
  CHECK(out.failures[0].item_id == "exp1/role-nouns/congressperson/Jordan/meta-0");

  try {
    run_suite(items, {congress()}, backend, nullptr, {2, true, {}, "m"});
    FAIL("strict mode did not abort");
  } catch (const ScoringError& e) {
    CHECK(e.item_id() == "exp1/role-nouns/congressperson/Jordan/meta-0");
  }
}

TEST_CASE("unknown variant set is an item failure") {
  MockBackend mock;
  auto items = small_suite();
  items.front().variant_set_id = "nope";
  const auto out = run_suite(items, {congress()}, mock, nullptr, {1, false, {}, "m"});
  REQUIRE(out.failures.size() == 1);
  CHECK(out.failures[0].item_id == items.front().id);
}

TEST_CASE("results round-trip through JSON lines") {
  test::TempDir dir;
  MockBackend mock({7, 8, Architecture::Autoregressive});
  auto items = small_suite();
  items[1].way_of_asking = WayOfAsking::indirect(Adjective::Best, Verb::Refer);
  items[1].experiment = Experiment::Exp2;
  const auto out = run_suite(items, {congress()}, mock, nullptr, {1, false, {}, "m"});
  write_results(dir / "r.jsonl", out.results);
  const auto back = read_results(dir / "r.jsonl");
  REQUIRE(back.size() == out.results.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].item_id == out.results[i].item_id);
    CHECK(back[i].p_reform == out.results[i].p_reform);
    CHECK(back[i].per_variant == out.results[i].per_variant);
    CHECK(back[i].way_of_asking == out.results[i].way_of_asking);
    CHECK(back[i].experiment == out.results[i].experiment);
    CHECK(back[i].name == out.results[i].name);
  }
  CHECK_THROWS_AS(read_results(dir / "missing.jsonl"), MissingInputError);
  test::write_file(dir / "bad.jsonl", "{not json}\n");
  CHECK_THROWS_AS(read_results(dir / "bad.jsonl"), ParseError);
}
