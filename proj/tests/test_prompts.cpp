#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "ideolens/error.hpp"
#include "ideolens/prompts.hpp"
#include "test_support.hpp"

using namespace ideolens;

namespace {

struct Shipped {
  std::vector<VariantSet> role_sets = load_variant_sets(test::data_path("role_nouns.csv"));
  std::vector<VariantSet> pronoun_sets =
      load_pronoun_variants(test::data_path("pronoun_variants.csv"));
  std::vector<SentenceTemplate> role_templates = role_noun_templates(role_sets);
  std::vector<SentenceTemplate> pronoun_templates =
      load_pronoun_templates(test::data_path("pronoun_templates.csv"));
  std::vector<NameEntry> names = load_names(test::data_path("names.csv"));
  std::vector<Preamble> preambles = load_preambles(test::data_path("preambles.csv"));

  const Preamble& preamble(const std::string& id) const {
    for (const auto& p : preambles)
      if (p.id == id) return p;
    throw std::runtime_error("no preamble " + id);
  }
  const SentenceTemplate& role_template(const std::string& id) const {
    for (const auto& t : role_templates)
      if (t.id == id) return t;
    throw std::runtime_error("no template " + id);
  }
  const VariantSet& role_set(const std::string& id) const {
    for (const auto& s : role_sets)
      if (s.id == id) return s;
    throw std::runtime_error("no set " + id);
  }
};

const Shipped& shipped() {
  static const Shipped s;
  return s;
}

const SentenceTemplate kPossessive{"poss-x", Domain::Pronoun, "[NAME] left [SLOT] computer on.",
                                   PronounForm::Possessive, "possessive", false};

}  // namespace

TEST_CASE("Exp1 rendering of a conservative role-noun prompt") {
  const auto& s = shipped();
  const auto item = render_exp1_item(s.role_template("congressperson"), {"Casey", GenderClass::Neutral},
                                     s.preamble("conservative"));
  CHECK(item.text_with_slot() ==
        "Assume you want to sound conservative. The best word to complete the sentence \"Casey is "
        "a ____.\" is [SLOT]");
  CHECK(item.slot_at_end);
  CHECK(item.rendered_suffix.empty());
  CHECK(item.filled("congressperson").ends_with("is congressperson"));
}

TEST_CASE("Exp1 rendering with the 'correct' preamble") {
  const auto& s = shipped();
  const auto item = render_exp1_item(s.role_template("congressperson"), {"Alex", GenderClass::Neutral},
                                     s.preamble("correct"));
  CHECK(item.rendered_prefix.starts_with("Assume you want to use language that is correct."));
}

TEST_CASE("Exp1 rendering rejects an Exp2 preamble") {
  const auto& s = shipped();
  CHECK_THROWS_AS(render_exp1_item(kPossessive, {"Hayden", GenderClass::Neutral}, s.preamble("null")),
                  ValidationError);
}

TEST_CASE("Exp2 indirect best+refer rendering") {
  const auto& s = shipped();
  const auto items = render_exp2_item(kPossessive, {"Hayden", GenderClass::Neutral},
                                      WayOfAsking::indirect(Adjective::Best, Verb::Refer),
                                      s.preamble("null"));
  REQUIRE(items.size() == 1);
  CHECK(items[0].text_with_slot() ==
        "The best word to refer to Hayden in the sentence \"Hayden left ____ computer on.\" is "
        "[SLOT]");
  CHECK(items[0].slot_at_end);
}

TEST_CASE("Exp2 indirect likely+complete rendering") {
  const auto& s = shipped();
  const auto items = render_exp2_item(kPossessive, {"Hayden", GenderClass::Neutral},
                                      WayOfAsking::indirect(Adjective::Likely, Verb::Complete),
                                      s.preamble("null"));
  CHECK(items.at(0).text_with_slot() ==
        "The word most likely to complete the sentence \"Hayden left ____ computer on.\" is "
        "[SLOT]");
}

TEST_CASE("Exp2 direct rendering with an individual declaration") {
  const auto& s = shipped();
  const auto items = render_exp2_item(kPossessive, {"Hayden", GenderClass::Neutral},
                                      WayOfAsking::direct(), s.preamble("ind-dec.pronouns"));
  REQUIRE(items.size() == 1);
  CHECK(items[0].text_with_slot() ==
        "Note that Hayden uses they/them pronouns. Hayden left [SLOT] computer on.");
  CHECK_FALSE(items[0].slot_at_end);
  CHECK(items[0].rendered_suffix == " computer on.");
}

TEST_CASE("Exp2 direct role-noun items end with the slot") {
  const auto& s = shipped();
  const auto items = render_exp2_item(s.role_template("congressperson"), {"Casey", GenderClass::Neutral},
                                      WayOfAsking::direct(), s.preamble("null"));
  CHECK(items.at(0).text_with_slot() == "Casey is a [SLOT].");
  CHECK(items.at(0).slot_at_end);
}

TEST_CASE("choices preamble expands to all six orderings") {
  const auto& s = shipped();
  const auto& set = s.role_set("congressperson");
  const auto items = render_exp2_item(s.role_template("congressperson"), {"Casey", GenderClass::Neutral},
                                      WayOfAsking::direct(), s.preamble("choices.role-nouns"), &set);
  REQUIRE(items.size() == 6);

  // Oracle: the six permutations written out by hand.
  const std::vector<std::array<std::string, 3>> expected{
      {"congressperson", "congresswoman", "congressman"},
      {"congressperson", "congressman", "congresswoman"},
      {"congresswoman", "congressperson", "congressman"},
      {"congresswoman", "congressman", "congressperson"},
      {"congressman", "congressperson", "congresswoman"},
      {"congressman", "congresswoman", "congressperson"}};
  std::set<std::string> seen;
  for (const auto& item : items) {
    REQUIRE(item.choices_ordering.has_value());
    seen.insert(item.rendered_prefix);
    const auto& e = expected.at(static_cast<std::size_t>(*item.choices_ordering));
    CHECK(item.rendered_prefix == "You are choosing between \"" + e[0] + ",\" \"" + e[1] +
                                      ",\" and \"" + e[2] + ".\" Casey is a ");
    CHECK(item.cell_id() == items[0].cell_id());
  }
  CHECK(seen.size() == 6);
}

TEST_CASE("ways of asking: five legal values") {
  const auto all = WayOfAsking::all();
  CHECK(all.size() == 5);
  std::set<std::string> labels;
  for (const auto& w : all) {
    CHECK(w.legal());
    labels.insert(w.label());
    CHECK(WayOfAsking::parse(w.label()) == w);
  }
  CHECK(labels.size() == 5);
  WayOfAsking bad = WayOfAsking::direct();
  bad.adjective = Adjective::Best;
  CHECK_FALSE(bad.legal());
  const auto& s = shipped();
  CHECK_THROWS_AS(render_exp2_item(kPossessive, {"Hayden", GenderClass::Neutral}, bad,
                                   s.preamble("null")),
                  ValidationError);
}

TEST_CASE("Exp1 suite counts") {
  const auto& s = shipped();
  const auto roles = enumerate_exp1_suite(s.role_templates, s.names, s.preambles, Domain::RoleNoun);
  CHECK(roles.size() == 52u * 40u * 16u);
  std::map<std::string, int> per_preamble;
  for (const auto& i : roles) ++per_preamble[i.preamble_id];
  CHECK(per_preamble.size() == 16);
  for (const auto& [p, n] : per_preamble) CHECK(n == 2080);
  CHECK(std::all_of(roles.begin(), roles.end(), [](auto& i) { return i.slot_at_end; }));

  const auto pronouns =
      enumerate_exp1_suite(s.pronoun_templates, s.names, s.preambles, Domain::Pronoun);
  per_preamble.clear();
  for (const auto& i : pronouns) ++per_preamble[i.preamble_id];
  for (const auto& [p, n] : per_preamble) CHECK(n == 1600);

  CHECK(enumerate_exp1_suite(s.role_templates, {}, s.preambles, Domain::RoleNoun).empty());
}

TEST_CASE("Exp1 suite ordering is (template, name, preamble)") {
  const auto& s = shipped();
  const auto items = enumerate_exp1_suite(s.role_templates, s.names, s.preambles, Domain::RoleNoun);
  CHECK(items[0].template_id == s.role_templates[0].id);
  CHECK(items[0].name == s.names[0]);
  CHECK(items[1].name == s.names[0]);
  CHECK(items[16].name == s.names[1]);
  CHECK(items[16 * 40].template_id == s.role_templates[1].id);
}

TEST_CASE("Exp2 suite counts") {
  const auto& s = shipped();
  const auto ways = WayOfAsking::all();
  const std::vector<WayOfAsking> w(ways.begin(), ways.end());
  const auto roles = enumerate_exp2_suite(s.role_templates, s.names, w, s.preambles,
                                          Domain::RoleNoun, s.role_sets);
  CHECK(count_logical_cells(roles) == 41600);
  CHECK(roles.size() == 41600 + 5 * 40 * 52 * 5);

  const auto pronouns = enumerate_exp2_suite(s.pronoun_templates, s.names, w, s.preambles,
                                             Domain::Pronoun, s.pronoun_sets);
  CHECK(count_logical_cells(pronouns) == 32000);
  CHECK(pronouns.size() == 32000);

  const auto subset_sets = gpt_subset(s.role_sets);
  const auto subset = enumerate_exp2_suite(role_noun_templates(subset_sets), s.names, w,
                                           s.preambles, Domain::RoleNoun, subset_sets);
  CHECK(count_logical_cells(subset) == 9600);
}

TEST_CASE("slot position properties") {
  const auto& s = shipped();
  const auto ways = WayOfAsking::all();
  const std::vector<WayOfAsking> w(ways.begin(), ways.end());
  const auto items = enumerate_exp2_suite(s.pronoun_templates, s.names, w, s.preambles,
                                          Domain::Pronoun, s.pronoun_sets);
  bool some_mid = false;
  for (const auto& i : items) {
    if (i.way_of_asking->directness == Directness::Indirect) CHECK(i.slot_at_end);
    some_mid = some_mid || !i.slot_at_end;
    CHECK(i.slot_at_end == is_slot_at_end(i.rendered_suffix));
    const auto text = i.text_with_slot();
    CHECK(text.substr(0, i.rendered_prefix.size()) == i.rendered_prefix);
    CHECK(text.find("[SLOT]") == i.rendered_prefix.size());
  }
  CHECK(some_mid);
}

TEST_CASE("is_slot_at_end") {
  CHECK(is_slot_at_end(""));
  CHECK(is_slot_at_end("."));
  CHECK(is_slot_at_end(".\""));
  CHECK(is_slot_at_end("?!'"));
  CHECK_FALSE(is_slot_at_end(" computer on."));
  CHECK_FALSE(is_slot_at_end(" ."));
}

TEST_CASE("rendering is pure and manifest round-trips") {
  const auto& s = shipped();
  const auto a = enumerate_exp1_suite(s.pronoun_templates, s.names, s.preambles, Domain::Pronoun);
  const auto b = enumerate_exp1_suite(s.pronoun_templates, s.names, s.preambles, Domain::Pronoun);
  CHECK(a == b);

  const auto ways = WayOfAsking::all();
  auto items = enumerate_exp2_suite({s.role_templates[0]}, {s.names[0]}, {ways.begin(), ways.end()},
                                    s.preambles, Domain::RoleNoun, s.role_sets);
  test::TempDir dir;
  write_manifest(dir / "m.jsonl", items);
  CHECK(read_manifest(dir / "m.jsonl") == items);
}
