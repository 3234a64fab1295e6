#pragma once

// Stimulus store: role-noun sets, pronoun paradigms, sentence templates, names
// and preamble banks, loaded from CSV and validated on load.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ideolens {

enum class Domain { RoleNoun, Pronoun };
enum class PronounForm { Subject, Object, Reflexive, Possessive };
enum class GenderClass { Neutral, Feminine, Masculine };
enum class Experiment { Exp1 = 1, Exp2 = 2 };

enum class PreambleGroup {
  PositiveMetaling,
  Prog,
  Cons,
  ProgStance,
  ConsStance,
  Choices,
  IndividualDeclaration,
  IdeologyDeclaration,
  Null,
};

// Canonical spellings used in files and on the command line.
std::string_view to_string(Domain d);           // "role-nouns" | "pronouns"
std::string_view to_string(PronounForm f);      // "subject" | ...
std::string_view to_string(GenderClass g);      // "neutral" | ...
std::string_view to_string(PreambleGroup g);    // "positive-metaling" | "prog" | ...
Domain parse_domain(std::string_view s);
PronounForm parse_pronoun_form(std::string_view s);
GenderClass parse_gender_class(std::string_view s);
PreambleGroup parse_preamble_group(std::string_view s);
Experiment experiment_of(PreambleGroup g);

/// One lexical paradigm a prompt slot ranges over.
struct VariantSet {
  std::string id;
  Domain domain = Domain::RoleNoun;
  std::vector<std::string> reform_variants;
  std::string feminine_variant;
  std::string masculine_variant;
  std::string determiner;                        // RoleNoun only
  std::vector<std::string> variant_determiners;  // optional per-variant articles (reform.., fem, masc)
  std::optional<PronounForm> pronoun_form;       // Pronoun only
  std::string source;
  bool in_gpt_subset = false;

  /// Reform variants first, then feminine, then masculine.
  std::vector<std::string> variants() const;
  bool is_reform(std::string_view variant) const;

  friend bool operator==(const VariantSet&, const VariantSet&) = default;
};

enum class Criterion { ThreeVariants, SameDeterminer, ProperSubstring, Distinctness };
std::string_view to_string(Criterion c);

struct ValidationVerdict {
  std::vector<Criterion> violations;
  bool ok() const { return violations.empty(); }
  bool violates(Criterion c) const;
};

ValidationVerdict validate_variant_set(const VariantSet& set);

struct SentenceTemplate {
  std::string id;
  Domain domain = Domain::RoleNoun;
  std::string text;  // one [NAME], one [SLOT]
  std::optional<PronounForm> pronoun_form;
  std::string variant_set_id;
  bool slot_is_final_token_span = false;

  friend bool operator==(const SentenceTemplate&, const SentenceTemplate&) = default;
};

struct NameEntry {
  std::string name;
  GenderClass gender_class = GenderClass::Neutral;

  friend bool operator==(const NameEntry&, const NameEntry&) = default;
};

struct Preamble {
  std::string id;
  Experiment experiment = Experiment::Exp1;
  PreambleGroup group = PreambleGroup::Null;
  std::string text_template;     // may contain [NAME]; Choices role-noun text uses [V1] [V2] [V3]
  std::optional<Domain> domain;  // from an id suffix ".role-nouns" / ".pronouns"; unset = both

  bool applies_to(Domain d) const { return !domain || *domain == d; }
  friend bool operator==(const Preamble&, const Preamble&) = default;
};

inline constexpr std::string_view kNamePlaceholder = "[NAME]";
inline constexpr std::string_view kSlotPlaceholder = "[SLOT]";

/// Validates placeholder shape and computes slot_is_final_token_span.
/// Throws ValidationError on a missing/duplicated placeholder or a slot-initial template.
void check_template_shape(SentenceTemplate& t);

/// role_nouns.csv: `id,neutral,feminine,masculine,determiner,source,in_gpt_subset`.
std::vector<VariantSet> load_variant_sets(const std::filesystem::path& path);
/// pronoun_variants.csv: `form,neutral1,neutral2,feminine,masculine`.
std::vector<VariantSet> load_pronoun_variants(const std::filesystem::path& path);
/// pronoun_templates.csv: `id,form,text`.
std::vector<SentenceTemplate> load_pronoun_templates(const std::filesystem::path& path);
/// names.csv: `name,class`.
std::vector<NameEntry> load_names(const std::filesystem::path& path);
/// preambles.csv: `id,experiment,group,text`.
std::vector<Preamble> load_preambles(const std::filesystem::path& path);

/// "[NAME] is a [SLOT]." (or "an") for one role-noun set.
SentenceTemplate role_noun_template(const VariantSet& set);
std::vector<SentenceTemplate> role_noun_templates(const std::vector<VariantSet>& sets);

std::vector<VariantSet> gpt_subset(const std::vector<VariantSet>& sets);

}  // namespace ideolens
