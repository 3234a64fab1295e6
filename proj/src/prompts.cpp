#include "ideolens/prompts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "ideolens/error.hpp"

namespace ideolens {

namespace {

constexpr std::string_view kBlank = "____";

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + to.size()))
    text.replace(pos, from.size(), to);
  return text;
}

std::string core_with(const SentenceTemplate& t, const NameEntry& name, std::string_view slot) {
  return replace_all(replace_all(t.text, kNamePlaceholder, name.name), kSlotPlaceholder, slot);
}

std::string preamble_text(const Preamble& p, const NameEntry& name) {
  return replace_all(p.text_template, kNamePlaceholder, name.name);
}

std::string join_preamble(const std::string& preamble, std::string body) {
  if (preamble.empty()) return body;
  return preamble + " " + body;
}

std::string wrapper(std::string_view opening, const std::string& core) {
  return fmt::format("{} the sentence \"{}\" is ", opening, core);
}

std::string_view adjective_label(Adjective a) { return a == Adjective::Likely ? "likely" : "best"; }
std::string_view verb_label(Verb v) { return v == Verb::Complete ? "complete" : "refer"; }

}  // namespace

std::array<WayOfAsking, 5> WayOfAsking::all() {
  return {direct(), indirect(Adjective::Likely, Verb::Complete),
          indirect(Adjective::Best, Verb::Complete), indirect(Adjective::Likely, Verb::Refer),
          indirect(Adjective::Best, Verb::Refer)};
}

bool WayOfAsking::legal() const {
  if (directness == Directness::Direct) return !adjective && !verb;
  return adjective.has_value() && verb.has_value();
}

std::string WayOfAsking::label() const {
  if (!legal()) throw ValidationError("illegal way of asking");
  if (directness == Directness::Direct) return "direct";
  return fmt::format("{}+{}", adjective_label(*adjective), verb_label(*verb));
}

WayOfAsking WayOfAsking::parse(std::string_view label) {
  for (const auto& w : all())
    if (w.label() == label) return w;
  throw ParseError(fmt::format("unknown way of asking '{}'", label));
}

std::string PromptItem::cell_id() const {
  if (!choices_ordering) return id;
  return id.substr(0, id.rfind('/'));
}

std::string PromptItem::filled(std::string_view variant) const {
  std::string out = rendered_prefix;
  out += variant;
  out += rendered_suffix;
  return out;
}

bool is_slot_at_end(std::string_view suffix) {
  return std::all_of(suffix.begin(), suffix.end(), [](char c) {
    return c == '.' || c == '"' || c == '\'' || c == '!' || c == '?';
  });
}

PromptItem render_exp1_item(const SentenceTemplate& tmpl, const NameEntry& name,
                            const Preamble& preamble) {
  if (preamble.experiment != Experiment::Exp1)
    throw ValidationError(
        fmt::format("preamble '{}' is not an Experiment 1 preamble", preamble.id));
  if (!preamble.applies_to(tmpl.domain))
    throw ValidationError(fmt::format("preamble '{}' does not apply to {}", preamble.id,
                                      to_string(tmpl.domain)));
  PromptItem item;
  item.id = fmt::format("e1/{}/{}/{}/{}", to_string(tmpl.domain), tmpl.id, name.name, preamble.id);
  item.experiment = Experiment::Exp1;
  item.domain = tmpl.domain;
  item.template_id = tmpl.id;
  item.name = name;
  item.preamble_id = preamble.id;
  item.preamble_group = preamble.group;
  item.variant_set_id = tmpl.variant_set_id;
  item.rendered_prefix =
      join_preamble(preamble_text(preamble, name),
                    wrapper("The best word to complete", core_with(tmpl, name, kBlank)));
  item.slot_at_end = true;
  return item;
}

std::vector<PromptItem> render_exp2_item(const SentenceTemplate& tmpl, const NameEntry& name,
                                         const WayOfAsking& way, const Preamble& preamble,
                                         const VariantSet* set) {
  if (preamble.experiment != Experiment::Exp2)
    throw ValidationError(
        fmt::format("preamble '{}' is not an Experiment 2 preamble", preamble.id));
  if (!preamble.applies_to(tmpl.domain))
    throw ValidationError(fmt::format("preamble '{}' does not apply to {}", preamble.id,
                                      to_string(tmpl.domain)));
  if (!way.legal()) throw ValidationError("illegal way of asking");

  PromptItem base;
  base.id = fmt::format("e2/{}/{}/{}/{}/{}", to_string(tmpl.domain), tmpl.id, name.name,
                        way.label(), preamble.id);
  base.experiment = Experiment::Exp2;
  base.domain = tmpl.domain;
  base.template_id = tmpl.id;
  base.name = name;
  base.preamble_id = preamble.id;
  base.preamble_group = preamble.group;
  base.way_of_asking = way;
  base.variant_set_id = tmpl.variant_set_id;

  std::string body_prefix, body_suffix;
  if (way.directness == Directness::Direct) {
    const auto core = core_with(tmpl, name, kSlotPlaceholder);
    const auto slot = core.find(kSlotPlaceholder);
    body_prefix = core.substr(0, slot);
    body_suffix = core.substr(slot + kSlotPlaceholder.size());
  } else {
    std::string opening = *way.adjective == Adjective::Likely ? "The word most likely to"
                                                              : "The best word to";
    if (*way.verb == Verb::Complete)
      opening += " complete";
    else
      opening += fmt::format(" refer to {} in", name.name);
    body_prefix = wrapper(opening, core_with(tmpl, name, kBlank));
  }
  base.rendered_suffix = body_suffix;
  base.slot_at_end = is_slot_at_end(body_suffix);

  const auto text = preamble_text(preamble, name);
  const bool lists_variants = text.find("[V1]") != std::string::npos;
  if (!lists_variants) {
    base.rendered_prefix = join_preamble(text, body_prefix);
    return {base};
  }

  if (tmpl.domain != Domain::RoleNoun || set == nullptr)
    throw ValidationError(
        fmt::format("preamble '{}' lists variants and needs a role-noun variant set", preamble.id));
  auto variants = set->variants();
  if (variants.size() != 3)
    throw ValidationError(fmt::format("choices preamble needs three variants in '{}'", set->id));

  std::array<int, 3> order{0, 1, 2};
  std::vector<PromptItem> out;
  int index = 0;
  do {
    PromptItem item = base;
    std::string t = text;
    t = replace_all(t, "[V1]", variants[order[0]]);
    t = replace_all(t, "[V2]", variants[order[1]]);
    t = replace_all(t, "[V3]", variants[order[2]]);
    item.rendered_prefix = join_preamble(t, body_prefix);
    item.choices_ordering = index;
    item.id = fmt::format("{}/o{}", base.id, index);
    out.push_back(std::move(item));
    ++index;
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

std::vector<PromptItem> enumerate_exp1_suite(const std::vector<SentenceTemplate>& templates,
                                             const std::vector<NameEntry>& names,
                                             const std::vector<Preamble>& preambles,
                                             Domain domain) {
  std::vector<const Preamble*> selected;
  for (const auto& p : preambles)
    if (p.experiment == Experiment::Exp1 && p.applies_to(domain)) selected.push_back(&p);
  std::vector<PromptItem> items;
  items.reserve(templates.size() * names.size() * selected.size());
  for (const auto& t : templates) {
    if (t.domain != domain) continue;
    for (const auto& n : names)
      for (const auto* p : selected) items.push_back(render_exp1_item(t, n, *p));
  }
  return items;
}

std::vector<PromptItem> enumerate_exp2_suite(const std::vector<SentenceTemplate>& templates,
                                             const std::vector<NameEntry>& names,
                                             const std::vector<WayOfAsking>& ways,
                                             const std::vector<Preamble>& preambles, Domain domain,
                                             const std::vector<VariantSet>& variant_sets) {
  std::vector<const Preamble*> selected;
  for (const auto& p : preambles)
    if (p.experiment == Experiment::Exp2 && p.applies_to(domain)) selected.push_back(&p);
  std::vector<PromptItem> items;
  for (const auto& t : templates) {
    if (t.domain != domain) continue;
    const VariantSet* set = nullptr;
    for (const auto& s : variant_sets)
      if (s.id == t.variant_set_id) set = &s;
    for (const auto& n : names)
      for (const auto& w : ways)
        for (const auto* p : selected) {
          auto rendered = render_exp2_item(t, n, w, *p, set);
          std::move(rendered.begin(), rendered.end(), std::back_inserter(items));
        }
  }
  return items;
}

std::size_t count_logical_cells(const std::vector<PromptItem>& items) {
  std::set<std::string> cells;
  for (const auto& i : items) cells.insert(i.cell_id());
  return cells.size();
}

void to_json(nlohmann::json& j, const PromptItem& item) {
  j = nlohmann::json{
      {"id", item.id},
      {"experiment", static_cast<int>(item.experiment)},
      {"domain", to_string(item.domain)},
      {"template_id", item.template_id},
      {"name", {{"name", item.name.name}, {"gender_class", to_string(item.name.gender_class)}}},
      {"preamble_id", item.preamble_id},
      {"preamble_group", to_string(item.preamble_group)},
      {"way_of_asking", item.way_of_asking ? nlohmann::json(item.way_of_asking->label())
                                           : nlohmann::json(nullptr)},
      {"variant_set_id", item.variant_set_id},
      {"rendered_prefix", item.rendered_prefix},
      {"rendered_suffix", item.rendered_suffix},
      {"slot_at_end", item.slot_at_end},
      {"choices_ordering",
       item.choices_ordering ? nlohmann::json(*item.choices_ordering) : nlohmann::json(nullptr)},
  };
}

void from_json(const nlohmann::json& j, PromptItem& item) {
  item.id = j.at("id").get<std::string>();
  const int e = j.at("experiment").get<int>();
  if (e != 1 && e != 2) throw ParseError("experiment must be 1 or 2");
  item.experiment = static_cast<Experiment>(e);
  item.domain = parse_domain(j.at("domain").get<std::string>());
  item.template_id = j.at("template_id").get<std::string>();
  item.name.name = j.at("name").at("name").get<std::string>();
  item.name.gender_class = parse_gender_class(j.at("name").at("gender_class").get<std::string>());
  item.preamble_id = j.at("preamble_id").get<std::string>();
  item.preamble_group = parse_preamble_group(j.at("preamble_group").get<std::string>());
  if (j.at("way_of_asking").is_null())
    item.way_of_asking.reset();
  else
    item.way_of_asking = WayOfAsking::parse(j.at("way_of_asking").get<std::string>());
  item.variant_set_id = j.at("variant_set_id").get<std::string>();
  item.rendered_prefix = j.at("rendered_prefix").get<std::string>();
  item.rendered_suffix = j.at("rendered_suffix").get<std::string>();
  item.slot_at_end = j.at("slot_at_end").get<bool>();
  if (j.at("choices_ordering").is_null())
    item.choices_ordering.reset();
  else
    item.choices_ordering = j.at("choices_ordering").get<int>();
}

void write_manifest(const std::filesystem::path& path, const std::vector<PromptItem>& items) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  for (const auto& item : items) out << nlohmann::json(item).dump() << '\n';
}

std::vector<PromptItem> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError(fmt::format("cannot open manifest {}", path.string()));
  std::vector<PromptItem> items;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      items.push_back(nlohmann::json::parse(line).get<PromptItem>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
    }
  }
  return items;
}

}  // namespace ideolens
