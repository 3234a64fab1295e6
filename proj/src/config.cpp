#include "ideolens/config.hpp"

#include <fmt/format.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "ideolens/error.hpp"

namespace ideolens {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(StimulusSubset s) {
  return s == StimulusSubset::Full ? "full" : "gpt-subset-12";
}

namespace {

const std::set<std::string> kTopKeys{
    "model",         "domain",         "experiment",        "stimuli",
    "stimulus_subset", "backend",      "concurrency_limit", "alpha",
    "bonferroni_m",  "seed",           "output_dir",        "choices_averaging",
    "results"};

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(fmt::format("config key '{}{}' is missing or has the wrong type", where, key));
  }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return get<T>(j, key, where);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();

  json j;
  try {
    j = json::parse(buffer.str(), nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  if (!j.is_object()) throw ConfigError(fmt::format("{}: top level must be an object", path.string()));
  for (const auto& [key, value] : j.items())
    if (!kTopKeys.count(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));

  const fs::path base = fs::absolute(path).parent_path();
  RunConfig c;
  c.model = get<std::string>(j, "model", "");
  try {
    c.domain = parse_domain(get<std::string>(j, "domain", ""));
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  }
  const int exp = get<int>(j, "experiment", "");
  if (exp != 1 && exp != 2) throw ConfigError("config key 'experiment' must be 1 or 2");
  c.experiment = static_cast<Experiment>(exp);

  const json& s = j.contains("stimuli") ? j.at("stimuli") : json::object();
  c.stimuli.role_nouns = resolve(base, get<std::string>(s, "role_nouns", "stimuli."));
  c.stimuli.pronoun_variants = resolve(base, get<std::string>(s, "pronoun_variants", "stimuli."));
  c.stimuli.pronoun_templates = resolve(base, get<std::string>(s, "pronoun_templates", "stimuli."));
  c.stimuli.names = resolve(base, get<std::string>(s, "names", "stimuli."));
  c.stimuli.preambles = resolve(base, get<std::string>(s, "preambles", "stimuli."));

  const auto subset = get_or<std::string>(j, "stimulus_subset", "full", "");
  if (subset == "full")
    c.stimulus_subset = StimulusSubset::Full;
  else if (subset == "gpt-subset-12")
    c.stimulus_subset = StimulusSubset::GptSubset12;
  else
    throw ConfigError(fmt::format("stimulus_subset '{}' is not full or gpt-subset-12", subset));

  if (j.contains("backend")) {
    const json& b = j.at("backend");
    c.backend.kind = get_or<std::string>(b, "kind", "mock", "backend.");
    c.backend.base_url = get_or<std::string>(b, "base_url", "", "backend.");
    c.backend.model = get_or<std::string>(b, "model", c.model, "backend.");
    c.backend.api_key_env = get_or<std::string>(b, "api_key_env", "OPENAI_API_KEY", "backend.");
    c.backend.timeout_s = get_or<double>(b, "timeout_s", 60.0, "backend.");
    c.backend.max_attempts = get_or<int>(b, "max_attempts", 5, "backend.");
    c.backend.context_states = get_or<int>(b, "context_states", 8, "backend.");
    try {
      c.backend.architecture =
          parse_architecture(get_or<std::string>(b, "architecture", "autoregressive", "backend."));
    } catch (const ParseError& e) {
      throw ConfigError(e.what());
    }
    if (b.contains("api_key"))
      throw ConfigError("API keys are never read from the config; set backend.api_key_env");
  }

  c.concurrency_limit = get_or<int>(j, "concurrency_limit", 4, "");
  c.alpha = get_or<double>(j, "alpha", 0.05, "");
  if (j.contains("bonferroni_m") && !j.at("bonferroni_m").is_null()) {
    const json& m = j.at("bonferroni_m");
    if (m.is_string()) {
      if (m.get<std::string>() != "auto")
        throw ConfigError("bonferroni_m must be a positive integer or \"auto\"");
    } else {
      c.bonferroni_m = get<int>(j, "bonferroni_m", "");
    }
  }
  c.seed = get_or<std::uint64_t>(j, "seed", 0, "");
  c.output_dir = resolve(base, get_or<std::string>(j, "output_dir", "out", ""));

  const auto averaging = get_or<std::string>(j, "choices_averaging", "probability", "");
  if (averaging == "probability")
    c.choices_averaging = AveragingSpace::Probability;
  else if (averaging == "log")
    c.choices_averaging = AveragingSpace::Log;
  else
    throw ConfigError(fmt::format("choices_averaging '{}' is not probability or log", averaging));

  if (j.contains("results")) {
    const json& r = j.at("results");
    for (const auto& p : get_or<std::vector<std::string>>(r, "exp1", {}, "results."))
      c.exp1_results.push_back(resolve(base, p));
    for (const auto& p : get_or<std::vector<std::string>>(r, "exp2", {}, "results."))
      c.exp2_results.push_back(resolve(base, p));
  }

  validate_config(c);
  return c;
}

void validate_config(const RunConfig& c) {
  if (c.model.empty()) throw ConfigError("config key 'model' must be non-empty");
  if (c.concurrency_limit < 1) throw ConfigError("concurrency_limit must be a positive integer");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (c.bonferroni_m && *c.bonferroni_m < 1) throw ConfigError("bonferroni_m must be at least 1");
  if (c.backend.kind != "mock" && c.backend.kind != "openai")
    throw ConfigError(fmt::format("backend.kind '{}' is not mock or openai", c.backend.kind));
  if (c.backend.kind == "openai") {
    if (c.backend.base_url.empty()) throw ConfigError("backend.base_url is required for openai");
    if (c.backend.model.empty()) throw ConfigError("backend.model is required for openai");
    if (c.backend.api_key_env.empty()) throw ConfigError("backend.api_key_env must be non-empty");
  }
  if (c.backend.context_states < 1) throw ConfigError("backend.context_states must be >= 1");
  if (c.backend.timeout_s <= 0.0) throw ConfigError("backend.timeout_s must be positive");
  if (c.backend.max_attempts < 1) throw ConfigError("backend.max_attempts must be >= 1");

  const std::vector<std::pair<std::string_view, const fs::path*>> paths{
      {"stimuli.role_nouns", &c.stimuli.role_nouns},
      {"stimuli.pronoun_variants", &c.stimuli.pronoun_variants},
      {"stimuli.pronoun_templates", &c.stimuli.pronoun_templates},
      {"stimuli.names", &c.stimuli.names},
      {"stimuli.preambles", &c.stimuli.preambles}};
  for (const auto& [key, p] : paths)
    if (!fs::is_regular_file(*p))
      throw ConfigError(fmt::format("{}: no such file {}", key, p->string()));
}

}  // namespace ideolens
