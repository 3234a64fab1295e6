#include "ideolens/stimuli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

#include "ideolens/csv.hpp"
#include "ideolens/error.hpp"

namespace ideolens {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::pair<std::string_view, Enum> (&table)[N],
                std::string_view what) {
  for (const auto& [name, value] : table)
    if (name == s) return value;
  throw ParseError(fmt::format("unknown {} '{}'", what, s));
}

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum e, const std::pair<std::string_view, Enum> (&table)[N]) {
  for (const auto& [name, value] : table)
    if (value == e) return name;
  return "?";
}

constexpr std::pair<std::string_view, Domain> kDomains[] = {
    {"role-nouns", Domain::RoleNoun}, {"pronouns", Domain::Pronoun}};
constexpr std::pair<std::string_view, PronounForm> kForms[] = {
    {"subject", PronounForm::Subject},
    {"object", PronounForm::Object},
    {"reflexive", PronounForm::Reflexive},
    {"possessive", PronounForm::Possessive}};
constexpr std::pair<std::string_view, GenderClass> kClasses[] = {
    {"neutral", GenderClass::Neutral},
    {"feminine", GenderClass::Feminine},
    {"masculine", GenderClass::Masculine}};
constexpr std::pair<std::string_view, PreambleGroup> kGroups[] = {
    {"positive-metaling", PreambleGroup::PositiveMetaling},
    {"prog", PreambleGroup::Prog},
    {"cons", PreambleGroup::Cons},
    {"prog-stance", PreambleGroup::ProgStance},
    {"cons-stance", PreambleGroup::ConsStance},
    {"choices", PreambleGroup::Choices},
    {"ind-dec", PreambleGroup::IndividualDeclaration},
    {"ideo-dec", PreambleGroup::IdeologyDeclaration},
    {"null", PreambleGroup::Null}};
constexpr std::pair<std::string_view, Criterion> kCriteria[] = {
    {"three-variants", Criterion::ThreeVariants},
    {"same-determiner", Criterion::SameDeterminer},
    {"proper-substring", Criterion::ProperSubstring},
    {"distinctness", Criterion::Distinctness}};

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

bool is_trailing_punct(char c) {
  return c == '.' || c == '"' || c == '\'' || c == '!' || c == '?' || c == ' ';
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

void throw_if_invalid(const VariantSet& set) {
  auto verdict = validate_variant_set(set);
  if (verdict.ok()) return;
  std::string names;
  for (auto c : verdict.violations) {
    if (!names.empty()) names += ", ";
    names += to_string(c);
  }
  throw ValidationError(fmt::format("variant set '{}' violates: {}", set.id, names));
}

bool parse_bool(std::string_view s, std::string_view context) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw ParseError(fmt::format("{}: expected true|false, got '{}'", context, s));
}

}  // namespace

std::string_view to_string(Domain d) { return enum_name(d, kDomains); }
std::string_view to_string(PronounForm f) { return enum_name(f, kForms); }
std::string_view to_string(GenderClass g) { return enum_name(g, kClasses); }
std::string_view to_string(PreambleGroup g) { return enum_name(g, kGroups); }
std::string_view to_string(Criterion c) { return enum_name(c, kCriteria); }
Domain parse_domain(std::string_view s) { return parse_enum(s, kDomains, "domain"); }
PronounForm parse_pronoun_form(std::string_view s) { return parse_enum(s, kForms, "pronoun form"); }
GenderClass parse_gender_class(std::string_view s) { return parse_enum(s, kClasses, "name class"); }
PreambleGroup parse_preamble_group(std::string_view s) {
  return parse_enum(s, kGroups, "preamble group");
}

Experiment experiment_of(PreambleGroup g) {
  switch (g) {
    case PreambleGroup::PositiveMetaling:
    case PreambleGroup::Prog:
    case PreambleGroup::Cons:
    case PreambleGroup::ProgStance:
    case PreambleGroup::ConsStance:
      return Experiment::Exp1;
    default:
      return Experiment::Exp2;
  }
}

std::vector<std::string> VariantSet::variants() const {
  std::vector<std::string> out = reform_variants;
  out.push_back(feminine_variant);
  out.push_back(masculine_variant);
  return out;
}

bool VariantSet::is_reform(std::string_view variant) const {
  return std::find(reform_variants.begin(), reform_variants.end(), variant) != reform_variants.end();
}

bool ValidationVerdict::violates(Criterion c) const {
  return std::find(violations.begin(), violations.end(), c) != violations.end();
}

ValidationVerdict validate_variant_set(const VariantSet& set) {
  ValidationVerdict verdict;
  const auto all = set.variants();

  std::size_t expected_reform = 1;
  if (set.domain == Domain::Pronoun && set.pronoun_form == PronounForm::Reflexive)
    expected_reform = 2;
  bool shape_ok = set.reform_variants.size() == expected_reform;
  shape_ok = shape_ok && std::none_of(all.begin(), all.end(), [](auto& v) { return v.empty(); });
  if (set.domain == Domain::Pronoun && !set.pronoun_form) shape_ok = false;
  if (!shape_ok) verdict.violations.push_back(Criterion::ThreeVariants);

  if (set.domain == Domain::RoleNoun) {
    bool same = !set.determiner.empty();
    if (!set.variant_determiners.empty()) {
      same = same && set.variant_determiners.size() == all.size();
      for (const auto& d : set.variant_determiners) same = same && d == set.determiner;
    }
    if (!same) verdict.violations.push_back(Criterion::SameDeterminer);

    bool substring = false;
    for (const auto& a : all)
      for (const auto& b : all)
        if (!a.empty() && a != b && b.find(a) != std::string::npos) substring = true;
    if (substring) verdict.violations.push_back(Criterion::ProperSubstring);
  }

  std::set<std::string> unique(all.begin(), all.end());
  if (unique.size() != all.size()) verdict.violations.push_back(Criterion::Distinctness);
  return verdict;
}

void check_template_shape(SentenceTemplate& t) {
  if (count_occurrences(t.text, kNamePlaceholder) != 1)
    throw ValidationError(fmt::format("template '{}' must contain exactly one [NAME]", t.id));
  if (count_occurrences(t.text, kSlotPlaceholder) != 1)
    throw ValidationError(fmt::format("template '{}' must contain exactly one [SLOT]", t.id));
  const auto slot = t.text.find(kSlotPlaceholder);
  if (t.text.find_first_not_of(" \"'") == slot)
    throw ValidationError(fmt::format("template '{}' is slot-initial", t.id));
  const auto rest = std::string_view(t.text).substr(slot + kSlotPlaceholder.size());
  t.slot_is_final_token_span = std::all_of(rest.begin(), rest.end(), is_trailing_punct);
}

std::vector<VariantSet> load_variant_sets(const std::filesystem::path& path) {
  const auto rows = csv::load(
      path, {"id", "neutral", "feminine", "masculine", "determiner", "source", "in_gpt_subset"});
  std::vector<VariantSet> sets;
  std::set<std::string> ids;
  for (const auto& r : rows) {
    VariantSet s;
    s.id = r[0];
    s.domain = Domain::RoleNoun;
    s.reform_variants = {r[1]};
    s.feminine_variant = r[2];
    s.masculine_variant = r[3];
    if (r[4].find('/') != std::string::npos) {
      s.variant_determiners = split(r[4], '/');
      s.determiner = s.variant_determiners.front();
    } else {
      s.determiner = r[4];
    }
    s.source = r[5];
    s.in_gpt_subset = parse_bool(r[6], path.string());
    if (!ids.insert(s.id).second)
      throw ValidationError(fmt::format("duplicate variant set id '{}'", s.id));
    throw_if_invalid(s);
    sets.push_back(std::move(s));
  }
  return sets;
}

std::vector<VariantSet> load_pronoun_variants(const std::filesystem::path& path) {
  const auto rows = csv::load(path, {"form", "neutral1", "neutral2", "feminine", "masculine"});
  std::vector<VariantSet> sets;
  std::set<std::string> forms;
  for (const auto& r : rows) {
    VariantSet s;
    s.domain = Domain::Pronoun;
    s.pronoun_form = parse_pronoun_form(r[0]);
    s.id = r[0];
    s.reform_variants = {r[1]};
    if (!r[2].empty()) s.reform_variants.push_back(r[2]);
    s.feminine_variant = r[3];
    s.masculine_variant = r[4];
    if (!forms.insert(s.id).second)
      throw ValidationError(fmt::format("duplicate pronoun form '{}'", s.id));
    throw_if_invalid(s);
    sets.push_back(std::move(s));
  }
  return sets;
}

std::vector<SentenceTemplate> load_pronoun_templates(const std::filesystem::path& path) {
  const auto rows = csv::load(path, {"id", "form", "text"});
  std::vector<SentenceTemplate> out;
  std::set<std::string> ids;
  for (const auto& r : rows) {
    SentenceTemplate t;
    t.id = r[0];
    t.domain = Domain::Pronoun;
    t.pronoun_form = parse_pronoun_form(r[1]);
    t.variant_set_id = r[1];
    t.text = r[2];
    if (!ids.insert(t.id).second)
      throw ValidationError(fmt::format("duplicate template id '{}'", t.id));
    check_template_shape(t);
    out.push_back(std::move(t));
  }
  // Grouped by form, file order within a form.
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return *a.pronoun_form < *b.pronoun_form;
  });
  return out;
}

std::vector<NameEntry> load_names(const std::filesystem::path& path) {
  const auto rows = csv::load(path, {"name", "class"});
  std::vector<NameEntry> out;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    if (r[0].empty()) throw ValidationError("empty name");
    if (!seen.insert(r[0]).second)
      throw ValidationError(fmt::format("duplicate name '{}'", r[0]));
    out.push_back({r[0], parse_gender_class(r[1])});
  }
  return out;
}

std::vector<Preamble> load_preambles(const std::filesystem::path& path) {
  const auto rows = csv::load(path, {"id", "experiment", "group", "text"});
  std::vector<Preamble> out;
  std::set<std::string> ids;
  for (const auto& r : rows) {
    Preamble p;
    p.id = r[0];
    if (r[1] == "1")
      p.experiment = Experiment::Exp1;
    else if (r[1] == "2")
      p.experiment = Experiment::Exp2;
    else
      throw ParseError(fmt::format("preamble '{}': experiment must be 1 or 2", p.id));
    p.group = parse_preamble_group(r[2]);
    p.text_template = r[3];
    if (experiment_of(p.group) != p.experiment)
      throw ValidationError(fmt::format("preamble '{}': group {} does not belong to experiment {}",
                                        p.id, to_string(p.group), r[1]));
    if (auto dot = p.id.rfind('.'); dot != std::string::npos)
      p.domain = parse_domain(std::string_view(p.id).substr(dot + 1));
    if (p.group == PreambleGroup::Null && !p.text_template.empty())
      throw ValidationError(fmt::format("null preamble '{}' must have empty text", p.id));
    if (!ids.insert(p.id).second)
      throw ValidationError(fmt::format("duplicate preamble id '{}'", p.id));
    out.push_back(std::move(p));
  }
  return out;
}

SentenceTemplate role_noun_template(const VariantSet& set) {
  SentenceTemplate t;
  t.id = set.id;
  t.domain = Domain::RoleNoun;
  t.variant_set_id = set.id;
  t.text = fmt::format("[NAME] is {} [SLOT].", set.determiner);
  check_template_shape(t);
  return t;
}

std::vector<SentenceTemplate> role_noun_templates(const std::vector<VariantSet>& sets) {
  std::vector<SentenceTemplate> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.push_back(role_noun_template(s));
  return out;
}

std::vector<VariantSet> gpt_subset(const std::vector<VariantSet>& sets) {
  std::vector<VariantSet> out;
  std::copy_if(sets.begin(), sets.end(), std::back_inserter(out),
               [](const auto& s) { return s.in_gpt_subset; });
  return out;
}

}  // namespace ideolens
