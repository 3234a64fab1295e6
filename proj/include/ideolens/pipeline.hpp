#pragma once

// generate -> score -> analyze -> report, each reading the previous stage's
// files under output_dir.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ideolens/beta_regression.hpp"
#include "ideolens/config.hpp"
#include "ideolens/prompts.hpp"

namespace ideolens {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfig = 2;
inline constexpr int kCredential = 3;
inline constexpr int kMissingInput = 4;
inline constexpr int kStrictScoring = 5;
}  // namespace exit_code

struct Overrides {
  std::optional<Domain> domain;
  std::optional<Experiment> experiment;
  std::optional<std::uint64_t> seed;
  std::optional<int> concurrency;
  std::optional<std::filesystem::path> out;
  bool strict = false;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

struct Stimuli {
  std::vector<VariantSet> variant_sets;
  std::vector<SentenceTemplate> templates;
  std::vector<NameEntry> names;
  std::vector<Preamble> preambles;
};

/// Variant sets, templates, names and preambles for the configured domain and
/// subset. Every role-noun set must pass the validator.
Stimuli load_stimuli(const RunConfig& config);

std::vector<PromptItem> build_suite(const RunConfig& config, const Stimuli& stimuli);

struct RunPaths {
  std::filesystem::path manifest;
  std::filesystem::path results;
  std::filesystem::path failures;
  std::filesystem::path cache;
  std::filesystem::path analysis_dir;
  std::filesystem::path report_dir;
};
RunPaths run_paths(const RunConfig& config);
RunPaths run_paths(const RunConfig& config, Experiment experiment);

struct GenerateSummary {
  std::size_t items = 0;
  std::size_t logical_cells = 0;
  std::filesystem::path manifest;
};
GenerateSummary cmd_generate(const RunConfig& config, std::ostream& log);

struct ScoreSummary {
  std::size_t cells = 0;
  std::size_t failures = 0;
  double cache_hit_rate = 0.0;
  std::filesystem::path results;
};
/// Throws MissingInputError without a manifest, CredentialError from the HTTP
/// backend and ScoringError in strict mode.
ScoreSummary cmd_score(const RunConfig& config, bool strict, std::ostream& log);

/// Exp1: pre-test and bias verdicts per model. Exp2: one regression per model.
/// Throws MissingInputError for absent results or incomplete cells.
std::vector<std::filesystem::path> cmd_analyze(const RunConfig& config, std::ostream& log);

/// Renders whatever analyses exist for the domain. Throws MissingInputError
/// when there are none.
std::vector<std::filesystem::path> cmd_report(const RunConfig& config, std::ostream& log);

/// Loads the config, applies overrides and runs one command, mapping errors
/// to exit statuses.
int run_command(std::string_view command, const std::filesystem::path& config_path,
                const Overrides& overrides, std::ostream& out, std::ostream& err);

nlohmann::ordered_json fit_to_json(const BetaRegressionFit& fit);
BetaRegressionFit fit_from_json(const nlohmann::ordered_json& j);

/// Fits the condition-coded model on Exp2 results of one model and domain.
BetaRegressionFit fit_exp2(const std::vector<ReformProbability>& results,
                           const FitOptions& options = {});

}  // namespace ideolens
