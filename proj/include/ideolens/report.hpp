#pragma once

// Paper-style artifacts: significance-colored coefficient tables, the pre-test
// table, the Experiment 1 bias summary dot plot and per-condition mean bars.
// Every emitter renders from one in-memory aggregate so CSV and SVG agree.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ideolens/beta_regression.hpp"
#include "ideolens/scorer.hpp"
#include "ideolens/stats.hpp"

namespace ideolens {

enum class Significance { Positive, Negative, Baseline, NotSignificant };
std::string_view to_string(Significance s);
/// Cell background, or nullopt for unshaded cells.
std::optional<std::string_view> cell_color(Significance s);

struct CellStyle {
  double value = 0.0;
  Significance significance = Significance::NotSignificant;
};

/// Intercepts become Baseline when significant; other predictors Positive or
/// Negative by sign. adjusted_p >= alpha is always NotSignificant.
CellStyle style_cell(double value, double adjusted_p, double alpha, bool intercept);

/// Formats with 6 significant digits; the report's only float format for CSV/SVG.
std::string format_value(double v);

struct ModelFit {
  std::string model;
  BetaRegressionFit fit;
};

struct CoefficientTable {
  std::vector<std::string> models;
  std::vector<std::string> predictors;
  std::vector<std::vector<CellStyle>> cells;  // [predictor][model]
  std::string markdown;
  std::string csv;
};

/// One column per model, one row per predictor. p-values are Bonferroni
/// adjusted by m before styling. Throws StatsError for an empty list or when
/// the fits disagree on the predictor set.
CoefficientTable emit_coefficient_table(const std::vector<ModelFit>& fits, double alpha, int m);

struct PretestEntry {
  std::string model;
  Domain domain = Domain::RoleNoun;
  PretestResult result;
};

struct PretestTable {
  std::string markdown;
  std::string csv;
};

/// Two rows per domain (groups, stances), one column per model; a cell is
/// shaded when that one-tailed test is significant after adjustment.
PretestTable emit_pretest_table(const std::vector<PretestEntry>& entries, double alpha);

struct Exp1SummaryRow {
  std::string model;
  bool excluded = false;
  double meta = 0.0;
  double prog = 0.0;
  double cons = 0.0;
  double prog_stance = 0.0;
  double cons_stance = 0.0;
  std::optional<BiasVerdict> groups;   // absent when excluded
  std::optional<BiasVerdict> stances;
};

/// Aggregated group means for one model.
Exp1SummaryRow summary_row(const std::string& model, const GroupMeans& means);

struct Exp1Summary {
  std::string svg;
  std::string csv;
};

/// Dot plot on a fixed [0,1] axis, one row per model, groups panel and stances
/// panel. A purple (progressive) or orange (conservative) line joins meta and
/// the closer group only for significant verdicts.
Exp1Summary emit_exp1_summary(const std::vector<Exp1SummaryRow>& rows);

inline constexpr std::string_view kProgressiveColor = "#7b3294";
inline constexpr std::string_view kConservativeColor = "#e66101";

struct ConditionMean {
  std::string model;
  Experiment experiment = Experiment::Exp1;
  Domain domain = Domain::RoleNoun;
  std::string family;     // preamble group
  std::string condition;  // preamble id (Exp1) or way of asking (Exp2)
  double mean_p_reform = 0.0;
  std::size_t count = 0;
};

struct ConditionMeans {
  std::vector<ConditionMean> rows;
  std::string csv;
  std::optional<std::string> svg;  // absent for empty input
};

/// Mean p_reform per (model, experiment, domain, condition), bars grouped by
/// preamble family.
ConditionMeans emit_condition_means(const std::vector<ReformProbability>& results);

/// Writes `text` to dir/name, creating dir. Throws std::runtime_error on I/O failure.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ideolens
