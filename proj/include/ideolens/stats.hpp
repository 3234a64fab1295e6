#pragma once

// Experiment 1 statistics: group means, per-template deltas, paired t-tests,
// the progressive-vs-conservative pre-test and the bias test.

#include <compare>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ideolens/scorer.hpp"

namespace ideolens {

enum class Tails { One, Two };

struct TTestResult {
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  Tails tails = Tails::Two;
  double mean_difference = 0.0;
};

/// Paired t-test on d = a - b. The one-tailed p tests mean(d) > 0.
/// Throws StatsError for n < 2 or when every difference is identical.
TTestResult paired_t_test(std::span<const std::pair<double, double>> pairs, Tails tails);

/// min(1, p * m).
double bonferroni_adjust(double p, int m);

/// (y * (n - 1) + 0.5) / n, mapping [0,1] into the open interval.
std::vector<double> squeeze_unit_interval(std::span<const double> y);

struct TemplateKey {
  std::string template_id;
  std::string name;
  auto operator<=>(const TemplateKey&) const = default;
};

/// Per-(template, name) means of p_reform for each Experiment 1 preamble group.
/// Expected preambles per group are the union observed across all keys, so a
/// key missing one of them is an error on lookup.
class GroupMeans {
 public:
  explicit GroupMeans(const std::vector<ReformProbability>& results);

  double mean(const TemplateKey& key, PreambleGroup group) const;
  std::vector<TemplateKey> keys() const;
  bool has_group(PreambleGroup group) const { return expected_.count(group) > 0; }
  /// Mean over keys of the per-key group means.
  double aggregate(PreambleGroup group) const;

 private:
  struct Cell {
    double sum = 0.0;
    std::set<std::string> preambles;
  };
  std::map<std::pair<TemplateKey, PreambleGroup>, Cell> cells_;
  std::map<PreambleGroup, std::set<std::string>> expected_;
  std::set<TemplateKey> keys_;
};

double group_mean(const TemplateKey& key, PreambleGroup group,
                  const std::vector<ReformProbability>& results);

struct DeltaSample {
  TemplateKey template_key;
  double mean_meta = 0.0;
  double mean_group = 0.0;
  double delta = 0.0;  // |mean_group - mean_meta|
};

std::vector<DeltaSample> delta_series(const GroupMeans& means, PreambleGroup group,
                                      PreambleGroup meta = PreambleGroup::PositiveMetaling);

struct PretestResult {
  TTestResult groups;   // prog > cons, one-tailed
  TTestResult stances;  // prog-stance > cons-stance, one-tailed
  double groups_adjusted_p = 1.0;
  double stances_adjusted_p = 1.0;
  double groups_mean_difference = 0.0;
  double stances_mean_difference = 0.0;
  bool groups_degenerate = false;
  bool stances_degenerate = false;
  bool pass = false;
};

/// Pass iff both one-tailed tests are significant after Bonferroni. A test
/// with no variance in its differences counts as not significant.
PretestResult pretest_gate(const GroupMeans& means, double alpha, int m_models);

enum class BiasDirection { Progressive, Conservative, NoBias };
std::string_view to_string(BiasDirection d);

struct BiasVerdict {
  BiasDirection direction = BiasDirection::NoBias;
  TTestResult test;
  bool degenerate = false;
  double adjusted_p = 1.0;
  double mean_delta_prog = 0.0;
  double mean_delta_cons = 0.0;
};

/// Two-tailed paired t on (delta_prog, delta_cons). Direction goes to the group
/// with the smaller mean delta when the adjusted p is below alpha.
BiasVerdict bias_test(std::span<const double> delta_prog, std::span<const double> delta_cons,
                      double alpha, int m_models);
BiasVerdict bias_test(const GroupMeans& means, PreambleGroup prog_like, PreambleGroup cons_like,
                      double alpha, int m_models);

}  // namespace ideolens
