#pragma once

// Prompt forge: renders Experiment 1 and Experiment 2 prompt items from
// templates, names, preambles and ways of asking.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ideolens/stimuli.hpp"

namespace ideolens {

enum class Directness { Direct, Indirect };
enum class Adjective { Likely, Best };
enum class Verb { Complete, Refer };

struct WayOfAsking {
  Directness directness = Directness::Direct;
  std::optional<Adjective> adjective;  // Indirect only
  std::optional<Verb> verb;            // Indirect only

  static WayOfAsking direct() { return {}; }
  static WayOfAsking indirect(Adjective a, Verb v) { return {Directness::Indirect, a, v}; }
  /// direct, likely+complete, best+complete, likely+refer, best+refer
  static std::array<WayOfAsking, 5> all();
  static WayOfAsking parse(std::string_view label);

  bool legal() const;
  std::string label() const;

  friend bool operator==(const WayOfAsking&, const WayOfAsking&) = default;
};

struct PromptItem {
  std::string id;
  Experiment experiment = Experiment::Exp1;
  Domain domain = Domain::RoleNoun;
  std::string template_id;
  NameEntry name;
  std::string preamble_id;
  PreambleGroup preamble_group = PreambleGroup::Null;
  std::optional<WayOfAsking> way_of_asking;  // Exp2 only
  std::string variant_set_id;
  std::string rendered_prefix;
  std::string rendered_suffix;
  bool slot_at_end = true;
  std::optional<int> choices_ordering;  // Choices x RoleNoun only, index into next_permutation order

  /// Id shared by all choices orderings of one logical cell.
  std::string cell_id() const;
  std::string text_with_slot() const { return rendered_prefix + "[SLOT]" + rendered_suffix; }
  std::string filled(std::string_view variant) const;

  friend bool operator==(const PromptItem&, const PromptItem&) = default;
};

/// Suffix empty or only `. " ' ! ?`.
bool is_slot_at_end(std::string_view suffix);

PromptItem render_exp1_item(const SentenceTemplate& tmpl, const NameEntry& name,
                            const Preamble& preamble);

/// One item, or six (one per ordering) for Choices x RoleNoun. `set` supplies the
/// variants named in a Choices preamble and may be null otherwise.
std::vector<PromptItem> render_exp2_item(const SentenceTemplate& tmpl, const NameEntry& name,
                                         const WayOfAsking& way, const Preamble& preamble,
                                         const VariantSet* set = nullptr);

/// Ordered (template, name, preamble). Preambles of other experiments/domains are skipped.
std::vector<PromptItem> enumerate_exp1_suite(const std::vector<SentenceTemplate>& templates,
                                             const std::vector<NameEntry>& names,
                                             const std::vector<Preamble>& preambles, Domain domain);

/// Ordered (template, name, way, preamble, ordering).
std::vector<PromptItem> enumerate_exp2_suite(const std::vector<SentenceTemplate>& templates,
                                             const std::vector<NameEntry>& names,
                                             const std::vector<WayOfAsking>& ways,
                                             const std::vector<Preamble>& preambles, Domain domain,
                                             const std::vector<VariantSet>& variant_sets);

std::size_t count_logical_cells(const std::vector<PromptItem>& items);

void to_json(nlohmann::json& j, const PromptItem& item);
void from_json(const nlohmann::json& j, PromptItem& item);

void write_manifest(const std::filesystem::path& path, const std::vector<PromptItem>& items);
std::vector<PromptItem> read_manifest(const std::filesystem::path& path);

}  // namespace ideolens
