#pragma once

// Run configuration: one JSON file (comments allowed). Relative paths resolve
// against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ideolens/backend.hpp"
#include "ideolens/scorer.hpp"
#include "ideolens/stimuli.hpp"

namespace ideolens {

enum class StimulusSubset { Full, GptSubset12 };
std::string_view to_string(StimulusSubset s);  // "full" | "gpt-subset-12"

struct StimuliPaths {
  std::filesystem::path role_nouns;
  std::filesystem::path pronoun_variants;
  std::filesystem::path pronoun_templates;
  std::filesystem::path names;
  std::filesystem::path preambles;
};

struct BackendSettings {
  std::string kind = "mock";  // "mock" | "openai"
  std::string base_url;
  std::string model;
  std::string api_key_env = "OPENAI_API_KEY";
  double timeout_s = 60.0;
  int max_attempts = 5;
  Architecture architecture = Architecture::Autoregressive;
  int context_states = 8;  // mock only
};

struct RunConfig {
  std::string model;  // label written into results
  Domain domain = Domain::RoleNoun;
  Experiment experiment = Experiment::Exp1;
  StimuliPaths stimuli;
  StimulusSubset stimulus_subset = StimulusSubset::Full;
  BackendSettings backend;
  int concurrency_limit = 4;
  double alpha = 0.05;
  std::optional<int> bonferroni_m;  // nullopt = "auto"
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  AveragingSpace choices_averaging = AveragingSpace::Probability;
  // Extra results files for analyze/report; default is this run's own file.
  std::vector<std::filesystem::path> exp1_results;
  std::vector<std::filesystem::path> exp2_results;
};

/// Parses and validates. Throws ConfigError naming the offending key or path.
RunConfig load_config(const std::filesystem::path& path);

/// Field checks plus existence of every stimulus path.
void validate_config(const RunConfig& config);

}  // namespace ideolens
