#include "ideolens/stats.hpp"

#include <fmt/format.h>

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>

#include "ideolens/error.hpp"

namespace ideolens {

TTestResult paired_t_test(std::span<const std::pair<double, double>> pairs, Tails tails) {
  const auto n = pairs.size();
  if (n < 2) throw StatsError("paired t-test needs at least 2 pairs");
  double mean = 0.0;
  for (const auto& [a, b] : pairs) mean += a - b;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  double scale = 0.0;
  for (const auto& [a, b] : pairs) {
    const double d = (a - b) - mean;
    ss += d * d;
    scale = std::max(scale, std::abs(a - b));
  }
  const double var = ss / static_cast<double>(n - 1);
  const double eps = 64 * std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
  if (!(std::sqrt(var) > eps)) throw StatsError("paired t-test: differences have zero variance");

  TTestResult r;
  r.degrees_of_freedom = static_cast<int>(n - 1);
  r.mean_difference = mean;
  r.tails = tails;
  r.t_statistic = mean / std::sqrt(var / static_cast<double>(n));
  const boost::math::students_t dist(r.degrees_of_freedom);
  if (tails == Tails::Two)
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t_statistic)));
  else
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.t_statistic));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

double bonferroni_adjust(double p, int m) {
  if (!(p >= 0.0 && p <= 1.0)) throw StatsError(fmt::format("p-value {} outside [0,1]", p));
  if (m < 1) throw StatsError("Bonferroni m must be >= 1");
  return std::min(1.0, p * m);
}

std::vector<double> squeeze_unit_interval(std::span<const double> y) {
  const auto n = static_cast<double>(y.size());
  std::vector<double> out;
  out.reserve(y.size());
  for (double v : y) {
    if (!(v >= 0.0 && v <= 1.0)) throw StatsError(fmt::format("value {} outside [0,1]", v));
    out.push_back((v * (n - 1.0) + 0.5) / n);
  }
  return out;
}

GroupMeans::GroupMeans(const std::vector<ReformProbability>& results) {
  for (const auto& r : results) {
    if (r.experiment != Experiment::Exp1) continue;
    TemplateKey key{r.template_id, r.name.name};
    auto& cell = cells_[{key, r.preamble_group}];
    if (!cell.preambles.insert(r.preamble_id).second)
      throw StatsError(fmt::format("duplicate result for {} / {} / {}", key.template_id, key.name,
                                   r.preamble_id));
    cell.sum += r.p_reform;
    expected_[r.preamble_group].insert(r.preamble_id);
    keys_.insert(key);
  }
}

double GroupMeans::mean(const TemplateKey& key, PreambleGroup group) const {
  auto exp = expected_.find(group);
  if (exp == expected_.end())
    throw StatsError(fmt::format("no results for group {}", to_string(group)));
  auto it = cells_.find({key, group});
  const std::size_t have = it == cells_.end() ? 0 : it->second.preambles.size();
  if (have != exp->second.size()) {
    std::string missing;
    for (const auto& p : exp->second)
      if (it == cells_.end() || !it->second.preambles.count(p)) missing += " " + p;
    throw StatsError(fmt::format("{} / {}: missing preamble(s){} for group {}", key.template_id,
                                 key.name, missing, to_string(group)));
  }
  return it->second.sum / static_cast<double>(have);
}

std::vector<TemplateKey> GroupMeans::keys() const { return {keys_.begin(), keys_.end()}; }

double GroupMeans::aggregate(PreambleGroup group) const {
  double total = 0.0;
  for (const auto& k : keys_) total += mean(k, group);
  return keys_.empty() ? 0.0 : total / static_cast<double>(keys_.size());
}

double group_mean(const TemplateKey& key, PreambleGroup group,
                  const std::vector<ReformProbability>& results) {
  return GroupMeans(results).mean(key, group);
}

std::vector<DeltaSample> delta_series(const GroupMeans& means, PreambleGroup group,
                                      PreambleGroup meta) {
  std::vector<DeltaSample> out;
  for (const auto& key : means.keys()) {
    DeltaSample s;
    s.template_key = key;
    s.mean_meta = means.mean(key, meta);
    s.mean_group = means.mean(key, group);
    s.delta = std::abs(s.mean_group - s.mean_meta);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct OneTailed {
  TTestResult test;
  double adjusted = 1.0;
  double mean_difference = 0.0;
  bool degenerate = false;
};

OneTailed one_tailed(const GroupMeans& means, PreambleGroup a, PreambleGroup b, int m) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& key : means.keys()) pairs.emplace_back(means.mean(key, a), means.mean(key, b));
  OneTailed r;
  for (const auto& [x, y] : pairs) r.mean_difference += x - y;
  if (!pairs.empty()) r.mean_difference /= static_cast<double>(pairs.size());
  try {
    r.test = paired_t_test(pairs, Tails::One);
    r.adjusted = bonferroni_adjust(r.test.p_value, m);
  } catch (const StatsError&) {
    r.degenerate = true;
    r.test.tails = Tails::One;
    r.test.degrees_of_freedom = static_cast<int>(pairs.size()) - 1;
    r.test.mean_difference = r.mean_difference;
  }
  return r;
}

}  // namespace

PretestResult pretest_gate(const GroupMeans& means, double alpha, int m_models) {
  const auto g = one_tailed(means, PreambleGroup::Prog, PreambleGroup::Cons, m_models);
  const auto s = one_tailed(means, PreambleGroup::ProgStance, PreambleGroup::ConsStance, m_models);
  PretestResult r;
  r.groups = g.test;
  r.stances = s.test;
  r.groups_adjusted_p = g.adjusted;
  r.stances_adjusted_p = s.adjusted;
  r.groups_mean_difference = g.mean_difference;
  r.stances_mean_difference = s.mean_difference;
  r.groups_degenerate = g.degenerate;
  r.stances_degenerate = s.degenerate;
  r.pass = !g.degenerate && !s.degenerate && g.adjusted < alpha && s.adjusted < alpha;
  return r;
}

std::string_view to_string(BiasDirection d) {
  switch (d) {
    case BiasDirection::Progressive:
      return "progressive";
    case BiasDirection::Conservative:
      return "conservative";
    case BiasDirection::NoBias:
      return "none";
  }
  return "?";
}

BiasVerdict bias_test(std::span<const double> delta_prog, std::span<const double> delta_cons,
                      double alpha, int m_models) {
  if (delta_prog.size() != delta_cons.size())
    throw StatsError("bias test needs paired delta series of equal length");
  std::vector<std::pair<double, double>> pairs;
  BiasVerdict v;
  for (std::size_t i = 0; i < delta_prog.size(); ++i) {
    pairs.emplace_back(delta_prog[i], delta_cons[i]);
    v.mean_delta_prog += delta_prog[i];
    v.mean_delta_cons += delta_cons[i];
  }
  if (!pairs.empty()) {
    v.mean_delta_prog /= static_cast<double>(pairs.size());
    v.mean_delta_cons /= static_cast<double>(pairs.size());
  }
  try {
    v.test = paired_t_test(pairs, Tails::Two);
    v.adjusted_p = bonferroni_adjust(v.test.p_value, m_models);
  } catch (const StatsError&) {
    if (pairs.size() < 2) throw;
    v.degenerate = true;
    v.test.degrees_of_freedom = static_cast<int>(pairs.size()) - 1;
    v.test.mean_difference = v.mean_delta_prog - v.mean_delta_cons;
  }
  if (!v.degenerate && v.adjusted_p < alpha)
    v.direction = v.mean_delta_cons < v.mean_delta_prog ? BiasDirection::Conservative
                                                        : BiasDirection::Progressive;
  return v;
}

BiasVerdict bias_test(const GroupMeans& means, PreambleGroup prog_like, PreambleGroup cons_like,
                      double alpha, int m_models) {
  const auto prog = delta_series(means, prog_like);
  const auto cons = delta_series(means, cons_like);
  std::vector<double> dp, dc;
  for (std::size_t i = 0; i < prog.size(); ++i) {
    if (prog[i].template_key != cons[i].template_key)
      throw StatsError("delta series cover different templates");
    dp.push_back(prog[i].delta);
    dc.push_back(cons[i].delta);
  }
  return bias_test(dp, dc, alpha, m_models);
}

}  // namespace ideolens
