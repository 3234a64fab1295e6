#include "ideolens/pipeline.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>

#include "ideolens/csv.hpp"
#include "ideolens/error.hpp"
#include "ideolens/report.hpp"
#include "ideolens/stats.hpp"

namespace ideolens {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.domain) c.domain = *o.domain;
  if (o.experiment) c.experiment = *o.experiment;
  if (o.seed) c.seed = *o.seed;
  if (o.concurrency) {
    if (*o.concurrency < 1) throw ConfigError("--concurrency must be a positive integer");
    c.concurrency_limit = *o.concurrency;
  }
  if (o.out) c.output_dir = fs::absolute(*o.out).lexically_normal();
}

Stimuli load_stimuli(const RunConfig& c) {
  Stimuli s;
  s.names = load_names(c.stimuli.names);
  s.preambles = load_preambles(c.stimuli.preambles);
  if (c.domain == Domain::RoleNoun) {
    s.variant_sets = load_variant_sets(c.stimuli.role_nouns);
    for (const auto& set : s.variant_sets) {
      const auto verdict = validate_variant_set(set);
      if (!verdict.ok())
        throw ValidationError(fmt::format("role-noun set '{}' violates {}", set.id,
                                          to_string(verdict.violations.front())));
    }
    if (c.stimulus_subset == StimulusSubset::GptSubset12) s.variant_sets = gpt_subset(s.variant_sets);
    s.templates = role_noun_templates(s.variant_sets);
  } else {
    if (c.stimulus_subset == StimulusSubset::GptSubset12)
      throw ConfigError("stimulus_subset gpt-subset-12 applies to role nouns only");
    s.variant_sets = load_pronoun_variants(c.stimuli.pronoun_variants);
    s.templates = load_pronoun_templates(c.stimuli.pronoun_templates);
  }
  return s;
}

std::vector<PromptItem> build_suite(const RunConfig& c, const Stimuli& s) {
  if (c.experiment == Experiment::Exp1)
    return enumerate_exp1_suite(s.templates, s.names, s.preambles, c.domain);
  const auto ways = WayOfAsking::all();
  return enumerate_exp2_suite(s.templates, s.names, {ways.begin(), ways.end()}, s.preambles,
                              c.domain, s.variant_sets);
}

RunPaths run_paths(const RunConfig& c) { return run_paths(c, c.experiment); }

RunPaths run_paths(const RunConfig& c, Experiment e) {
  const auto stem = fmt::format("exp{}_{}", static_cast<int>(e), to_string(c.domain));
  RunPaths p;
  p.manifest = c.output_dir / fmt::format("manifest_{}.jsonl", stem);
  p.results = c.output_dir / fmt::format("results_{}.jsonl", stem);
  p.failures = c.output_dir / fmt::format("failures_{}.json", stem);
  p.cache = c.output_dir / "cache" / "scores.jsonl";
  p.analysis_dir = c.output_dir / "analysis";
  p.report_dir = c.output_dir / "report";
  return p;
}

// ---------------------------------------------------------------------------

GenerateSummary cmd_generate(const RunConfig& c, std::ostream& log) {
  const Stimuli s = load_stimuli(c);
  const auto items = build_suite(c, s);
  GenerateSummary out;
  out.items = items.size();
  out.logical_cells = count_logical_cells(items);
  out.manifest = run_paths(c).manifest;
  write_manifest(out.manifest, items);
  if (c.experiment == Experiment::Exp1) {
    log << fmt::format("exp1 {}: {} items ({} templates x {} names x {} preambles)\n",
                       to_string(c.domain), out.items, s.templates.size(), s.names.size(),
                       out.items / std::max<std::size_t>(1, s.templates.size() * s.names.size()));
  } else {
    log << fmt::format("exp2 {}: {} logical cells, {} prompts\n", to_string(c.domain),
                       out.logical_cells, out.items);
  }
  log << fmt::format("manifest: {}\n", out.manifest.string());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<ScoringBackend> make_backend(const RunConfig& c) {
  if (c.backend.kind == "mock")
    return std::make_unique<MockBackend>(
        MockConfig{c.seed, c.backend.context_states, c.backend.architecture});
  HttpBackendConfig h;
  h.base_url = c.backend.base_url;
  h.model = c.backend.model;
  h.api_key_env = c.backend.api_key_env;
  h.timeout = std::chrono::milliseconds(static_cast<long long>(c.backend.timeout_s * 1000.0));
  h.max_attempts = c.backend.max_attempts;
  return std::make_unique<OpenAICompletionsBackend>(h);
}

void write_failures(const fs::path& path, const std::vector<ItemFailure>& failures) {
  ordered_json j = ordered_json::array();
  for (const auto& f : failures) j.push_back({{"item_id", f.item_id}, {"message", f.message}});
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

ScoreSummary cmd_score(const RunConfig& c, bool strict, std::ostream& log) {
  const auto paths = run_paths(c);
  if (!fs::is_regular_file(paths.manifest))
    throw MissingInputError(
        fmt::format("no manifest at {}; run generate first", paths.manifest.string()));
  const auto items = read_manifest(paths.manifest);
  const Stimuli s = load_stimuli(c);
  auto backend = make_backend(c);
  fs::create_directories(paths.cache.parent_path());
  ScoreCache cache(paths.cache);

  SuiteOptions options;
  options.concurrency_limit = c.concurrency_limit;
  options.strict = strict;
  options.averaging = c.choices_averaging;
  options.model = c.model;
  const auto outcome = run_suite(items, s.variant_sets, *backend, &cache, options);

  write_results(paths.results, outcome.results);
  write_failures(paths.failures, outcome.failures);
  ScoreSummary out{outcome.results.size(), outcome.failures.size(), outcome.cache_hit_rate(),
                   paths.results};
  log << fmt::format("scored {} cells with {} failures; cache hit-rate {:.4f} ({} of {} lookups)\n",
                     out.cells, out.failures, out.cache_hit_rate, outcome.cache_hits,
                     outcome.variant_lookups);
  if (out.failures > 0) log << fmt::format("failure report: {}\n", paths.failures.string());
  log << fmt::format("results: {}\n", paths.results.string());
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (v == 0.0) v = 0.0;
  return fmt::format("{:.17g}", v);
}

double parse_num(const std::string& s) {
  if (s == "nan" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

std::vector<fs::path> results_files(const RunConfig& c, Experiment e) {
  const auto& extra = e == Experiment::Exp1 ? c.exp1_results : c.exp2_results;
  if (!extra.empty()) return extra;
  return {run_paths(c, e).results};
}

/// Results of one experiment and domain, sorted by (model, item id).
std::vector<ReformProbability> load_results(const RunConfig& c, Experiment e) {
  std::vector<ReformProbability> all;
  for (const auto& path : results_files(c, e)) {
    if (!fs::is_regular_file(path))
      throw MissingInputError(fmt::format("no results file at {}", path.string()));
    for (auto& r : read_results(path))
      if (r.experiment == e && r.domain == c.domain) all.push_back(std::move(r));
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return std::tie(a.model, a.item_id) < std::tie(b.model, b.item_id);
  });
  return all;
}

std::vector<std::string> models_of(const std::vector<ReformProbability>& results) {
  std::vector<std::string> models;
  for (const auto& r : results)
    if (models.empty() || models.back() != r.model) models.push_back(r.model);
  return models;
}

std::vector<ReformProbability> results_of(const std::vector<ReformProbability>& results,
                                          const std::string& model) {
  std::vector<ReformProbability> out;
  for (const auto& r : results)
    if (r.model == model) out.push_back(r);
  return out;
}

int bonferroni_m(const RunConfig& c, std::size_t models) {
  return c.bonferroni_m ? *c.bonferroni_m : static_cast<int>(std::max<std::size_t>(1, models));
}

[[noreturn]] void throw_missing_cells(const std::string& model,
                                      const std::vector<std::string>& missing) {
  std::string list;
  for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += "\n  " + missing[i];
  if (missing.size() > 20) list += fmt::format("\n  ... and {} more", missing.size() - 20);
  throw MissingInputError(
      fmt::format("incomplete results for model '{}': {} missing cells:{}", model,
                  missing.size(), list));
}

void check_exp1_complete(const std::string& model, const std::vector<ReformProbability>& rs) {
  std::set<std::string> preambles;
  std::set<std::pair<std::string, std::string>> keys, seen;
  for (const auto& r : rs) {
    preambles.insert(r.preamble_id);
    keys.insert({r.template_id, r.name.name});
  }
  std::set<std::tuple<std::string, std::string, std::string>> present;
  for (const auto& r : rs) present.insert({r.template_id, r.name.name, r.preamble_id});
  std::vector<std::string> missing;
  for (const auto& [t, n] : keys)
    for (const auto& p : preambles)
      if (!present.count({t, n, p})) missing.push_back(fmt::format("{}/{}/{}", t, n, p));
  if (!missing.empty()) throw_missing_cells(model, missing);
}

void check_exp2_complete(const std::string& model, const std::vector<ReformProbability>& rs) {
  static const std::array<PreambleGroup, 4> kGroups{
      PreambleGroup::Null, PreambleGroup::Choices, PreambleGroup::IndividualDeclaration,
      PreambleGroup::IdeologyDeclaration};
  std::set<std::pair<std::string, std::string>> keys;
  std::set<std::tuple<std::string, std::string, std::string, PreambleGroup>> present;
  for (const auto& r : rs) {
    if (!r.way_of_asking)
      throw MissingInputError(fmt::format("Exp2 result {} has no way of asking", r.item_id));
    keys.insert({r.template_id, r.name.name});
    present.insert({r.template_id, r.name.name, r.way_of_asking->label(), r.preamble_group});
  }
  std::vector<std::string> missing;
  for (const auto& [t, n] : keys)
    for (const auto& w : WayOfAsking::all())
      for (auto g : kGroups)
        if (!present.count({t, n, w.label(), g}))
          missing.push_back(fmt::format("{}/{}/{}/{}", t, n, w.label(), to_string(g)));
  if (!missing.empty()) throw_missing_cells(model, missing);
}

const std::vector<std::string> kTestsHeader{"model", "domain", "test", "t",
                                            "df",    "p_raw",  "p_adjusted", "direction"};
const std::vector<std::string> kMeansHeader{"model", "domain", "group", "mean_reform"};
const std::vector<std::string> kRegressionHeader{"model", "domain", "predictor", "coefficient",
                                                 "std_error", "z", "p", "significant"};
const std::array<PreambleGroup, 5> kExp1Groups{PreambleGroup::PositiveMetaling, PreambleGroup::Prog,
                                               PreambleGroup::Cons, PreambleGroup::ProgStance,
                                               PreambleGroup::ConsStance};

fs::path exp1_tests_path(const RunConfig& c) {
  return run_paths(c).analysis_dir / fmt::format("exp1_tests_{}.csv", to_string(c.domain));
}
fs::path exp1_means_path(const RunConfig& c) {
  return run_paths(c).analysis_dir / fmt::format("exp1_means_{}.csv", to_string(c.domain));
}
fs::path exp2_regression_path(const RunConfig& c) {
  return run_paths(c).analysis_dir / fmt::format("exp2_regression_{}.csv", to_string(c.domain));
}
fs::path exp2_fits_path(const RunConfig& c) {
  return run_paths(c).analysis_dir / fmt::format("exp2_fits_{}.json", to_string(c.domain));
}

std::vector<fs::path> analyze_exp1(const RunConfig& c, std::ostream& log) {
  const auto results = load_results(c, Experiment::Exp1);
  if (results.empty())
    throw MissingInputError(fmt::format("no Exp1 {} results to analyze", to_string(c.domain)));
  const auto models = models_of(results);
  const int m = bonferroni_m(c, models.size());
  const std::string domain(to_string(c.domain));

  std::string tests = csv::join(kTestsHeader) + "\n";
  std::string means_csv = csv::join(kMeansHeader) + "\n";
  auto test_row = [&](const std::string& model, std::string_view name, const TTestResult& t,
                      bool degenerate, double p_adj, std::string_view direction) {
    tests += csv::join({model, domain, std::string(name),
                        degenerate ? "nan" : num(t.t_statistic),
                        fmt::format("{}", t.degrees_of_freedom), degenerate ? "nan" : num(t.p_value),
                        degenerate ? "nan" : num(p_adj), std::string(direction)}) +
             "\n";
  };

  for (const auto& model : models) {
    const auto rs = results_of(results, model);
    check_exp1_complete(model, rs);
    const GroupMeans means(rs);
    for (auto g : kExp1Groups) {
      if (!means.has_group(g))
        throw MissingInputError(
            fmt::format("model '{}' has no {} results", model, to_string(g)));
      means_csv += csv::join({model, domain, std::string(to_string(g)), num(means.aggregate(g))}) +
                   "\n";
    }

    const auto pre = pretest_gate(means, c.alpha, m);
    const bool groups_pass = !pre.groups_degenerate && pre.groups_adjusted_p < c.alpha;
    const bool stances_pass = !pre.stances_degenerate && pre.stances_adjusted_p < c.alpha;
    test_row(model, "pretest-groups", pre.groups, pre.groups_degenerate, pre.groups_adjusted_p,
             groups_pass ? "pass" : "fail");
    test_row(model, "pretest-stances", pre.stances, pre.stances_degenerate,
             pre.stances_adjusted_p, stances_pass ? "pass" : "fail");

    if (!pre.pass) {
      const TTestResult none;
      test_row(model, "bias-groups", none, true, 1.0, "excluded");
      test_row(model, "bias-stances", none, true, 1.0, "excluded");
      log << fmt::format("{} {}: pre-test failed, excluded from bias analysis\n", model, domain);
      continue;
    }
    const auto groups = bias_test(means, PreambleGroup::Prog, PreambleGroup::Cons, c.alpha, m);
    const auto stances =
        bias_test(means, PreambleGroup::ProgStance, PreambleGroup::ConsStance, c.alpha, m);
    test_row(model, "bias-groups", groups.test, groups.degenerate, groups.adjusted_p,
             to_string(groups.direction));
    test_row(model, "bias-stances", stances.test, stances.degenerate, stances.adjusted_p,
             to_string(stances.direction));
    log << fmt::format("{} {}: groups {} (p_adj={:.3g}), stances {} (p_adj={:.3g})\n", model,
                       domain, to_string(groups.direction), groups.adjusted_p,
                       to_string(stances.direction), stances.adjusted_p);
  }

  write_text_file(exp1_tests_path(c), tests);
  write_text_file(exp1_means_path(c), means_csv);
  return {exp1_tests_path(c), exp1_means_path(c)};
}

std::vector<fs::path> analyze_exp2(const RunConfig& c, std::ostream& log) {
  const auto results = load_results(c, Experiment::Exp2);
  if (results.empty())
    throw MissingInputError(fmt::format("no Exp2 {} results to analyze", to_string(c.domain)));
  const auto models = models_of(results);
  const int m = bonferroni_m(c, models.size());
  const std::string domain(to_string(c.domain));

  std::string csv_text = csv::join(kRegressionHeader) + "\n";
  ordered_json fits = ordered_json::array();
  for (const auto& model : models) {
    const auto rs = results_of(results, model);
    check_exp2_complete(model, rs);
    const auto fit = fit_exp2(rs);
    for (const auto& co : fit.coefficients) {
      const bool sig = bonferroni_adjust(std::isnan(co.p_value) ? 1.0 : co.p_value, m) < c.alpha;
      csv_text += csv::join({model, domain, co.predictor, num(co.estimate), num(co.std_error),
                             num(co.z), num(co.p_value), sig ? "true" : "false"}) +
                  "\n";
    }
    ordered_json entry{{"model", model}, {"domain", domain}, {"n", rs.size()}};
    entry["fit"] = fit_to_json(fit);
    fits.push_back(std::move(entry));
    log << fmt::format("{} {}: beta regression {} after {} iterations (|grad|={:.2e})\n", model,
                       domain, fit.converged ? "converged" : "did not converge", fit.iterations,
                       fit.gradient_norm);
  }
  write_text_file(exp2_regression_path(c), csv_text);
  write_text_file(exp2_fits_path(c), fits.dump(2) + "\n");
  return {exp2_regression_path(c), exp2_fits_path(c)};
}

}  // namespace

BetaRegressionFit fit_exp2(const std::vector<ReformProbability>& results,
                           const FitOptions& options) {
  std::vector<double> raw;
  std::vector<ConditionCode> codes;
  std::vector<std::string> items, names;
  for (const auto& r : results) {
    if (!r.way_of_asking)
      throw StatsError(fmt::format("result {} has no way of asking", r.item_id));
    raw.push_back(r.p_reform);
    codes.push_back(ConditionCode::from(*r.way_of_asking, r.preamble_group));
    items.push_back(r.template_id);
    names.push_back(r.name.name);
  }
  const auto y = squeeze_unit_interval(raw);
  const auto data = condition_design(y, codes, items, names);
  return fit_beta_regression(data, options);
}

std::vector<fs::path> cmd_analyze(const RunConfig& c, std::ostream& log) {
  return c.experiment == Experiment::Exp1 ? analyze_exp1(c, log) : analyze_exp2(c, log);
}

// ---------------------------------------------------------------------------

namespace {

ordered_json num_json(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

double json_num(const ordered_json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

ordered_json fit_to_json(const BetaRegressionFit& fit) {
  ordered_json coefficients = ordered_json::array();
  for (const auto& c : fit.coefficients)
    coefficients.push_back({{"predictor", c.predictor},
                            {"estimate", num_json(c.estimate)},
                            {"std_error", num_json(c.std_error)},
                            {"z", num_json(c.z)},
                            {"p_value", num_json(c.p_value)}});
  ordered_json variances = ordered_json::array();
  for (const auto& v : fit.random_intercept_variances)
    variances.push_back(
        {{"factor", v.factor}, {"variance", num_json(v.variance)}, {"at_boundary", v.at_boundary}});
  return {{"converged", fit.converged},
          {"iterations", fit.iterations},
          {"gradient_norm", num_json(fit.gradient_norm)},
          {"message", fit.message},
          {"mu_link", fit.mu_link},
          {"log_likelihood", num_json(fit.log_likelihood)},
          {"dispersion_phi", num_json(fit.dispersion_phi)},
          {"log_phi_std_error", num_json(fit.log_phi_std_error)},
          {"coefficients", coefficients},
          {"random_intercept_variances", variances}};
}

BetaRegressionFit fit_from_json(const ordered_json& j) {
  BetaRegressionFit fit;
  fit.converged = j.at("converged").get<bool>();
  fit.iterations = j.at("iterations").get<int>();
  fit.gradient_norm = json_num(j.at("gradient_norm"));
  fit.message = j.at("message").get<std::string>();
  fit.mu_link = j.at("mu_link").get<std::string>();
  fit.log_likelihood = json_num(j.at("log_likelihood"));
  fit.dispersion_phi = json_num(j.at("dispersion_phi"));
  fit.log_phi_std_error = json_num(j.at("log_phi_std_error"));
  for (const auto& c : j.at("coefficients"))
    fit.coefficients.push_back({c.at("predictor").get<std::string>(), json_num(c.at("estimate")),
                                json_num(c.at("std_error")), json_num(c.at("z")),
                                json_num(c.at("p_value"))});
  for (const auto& v : j.at("random_intercept_variances"))
    fit.random_intercept_variances.push_back({v.at("factor").get<std::string>(),
                                              json_num(v.at("variance")),
                                              v.at("at_boundary").get<bool>()});
  return fit;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Exp1SummaryRow> read_exp1_rows(const RunConfig& c, std::vector<PretestEntry>& pretests) {
  const auto tests = csv::load(exp1_tests_path(c), kTestsHeader);
  const auto means = csv::load(exp1_means_path(c), kMeansHeader);
  std::vector<Exp1SummaryRow> rows;
  auto row_for = [&](const std::string& model) -> Exp1SummaryRow& {
    for (auto& r : rows)
      if (r.model == model) return r;
    rows.push_back({});
    rows.back().model = model;
    return rows.back();
  };
  for (const auto& r : means) {
    auto& row = row_for(r[0]);
    const double v = parse_num(r[3]);
    switch (parse_preamble_group(r[2])) {
      case PreambleGroup::PositiveMetaling: row.meta = v; break;
      case PreambleGroup::Prog: row.prog = v; break;
      case PreambleGroup::Cons: row.cons = v; break;
      case PreambleGroup::ProgStance: row.prog_stance = v; break;
      case PreambleGroup::ConsStance: row.cons_stance = v; break;
      default: throw ParseError(fmt::format("unexpected group '{}' in means file", r[2]));
    }
  }
  std::map<std::string, PretestResult> pre;
  for (const auto& r : tests) {
    auto& row = row_for(r[0]);
    const double p_adj = parse_num(r[6]);
    const std::string& test = r[2];
    if (test == "pretest-groups" || test == "pretest-stances") {
      auto& p = pre[r[0]];
      const bool degenerate = std::isnan(p_adj);
      if (test == "pretest-groups") {
        p.groups_adjusted_p = degenerate ? 1.0 : p_adj;
        p.groups_degenerate = degenerate;
      } else {
        p.stances_adjusted_p = degenerate ? 1.0 : p_adj;
        p.stances_degenerate = degenerate;
      }
      continue;
    }
    if (r[7] == "excluded") {
      row.excluded = true;
      continue;
    }
    BiasVerdict v;
    v.adjusted_p = std::isnan(p_adj) ? 1.0 : p_adj;
    v.degenerate = std::isnan(p_adj);
    v.direction = r[7] == "progressive"    ? BiasDirection::Progressive
                  : r[7] == "conservative" ? BiasDirection::Conservative
                                           : BiasDirection::NoBias;
    (test == "bias-groups" ? row.groups : row.stances) = v;
  }
  for (const auto& row : rows) {
    auto& p = pre[row.model];
    p.groups_mean_difference = row.prog - row.cons;
    p.stances_mean_difference = row.prog_stance - row.cons_stance;
    pretests.push_back({row.model, c.domain, p});
  }
  return rows;
}

}  // namespace

std::vector<fs::path> cmd_report(const RunConfig& c, std::ostream& log) {
  const auto paths = run_paths(c);
  const std::string domain(to_string(c.domain));
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = paths.report_dir / name;
    write_text_file(path, text);
    written.push_back(path);
  };

  const bool have_exp1 = fs::is_regular_file(exp1_tests_path(c)) && fs::is_regular_file(exp1_means_path(c));
  const bool have_exp2 = fs::is_regular_file(exp2_fits_path(c));
  if (!have_exp1 && !have_exp2)
    throw MissingInputError(fmt::format("no {} analyses under {}; run analyze first", domain,
                                        paths.analysis_dir.string()));

  if (have_exp1) {
    std::vector<PretestEntry> pretests;
    const auto rows = read_exp1_rows(c, pretests);
    const auto summary = emit_exp1_summary(rows);
    emit(fmt::format("exp1_summary_{}.svg", domain), summary.svg);
    emit(fmt::format("exp1_summary_{}.csv", domain), summary.csv);
    const auto table = emit_pretest_table(pretests, c.alpha);
    emit(fmt::format("exp1_pretest_{}.md", domain), table.markdown);
    emit(fmt::format("exp1_pretest_{}.csv", domain), table.csv);
  }
  if (have_exp2) {
    std::ifstream in(exp2_fits_path(c));
    ordered_json j;
    try {
      j = ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(fmt::format("{}: {}", exp2_fits_path(c).string(), e.what()));
    }
    std::vector<ModelFit> fits;
    for (const auto& e : j) fits.push_back({e.at("model").get<std::string>(), fit_from_json(e.at("fit"))});
    const auto table = emit_coefficient_table(fits, c.alpha, bonferroni_m(c, fits.size()));
    emit(fmt::format("exp2_coefficients_{}.md", domain), table.markdown);
    emit(fmt::format("exp2_coefficients_{}.csv", domain), table.csv);
  }

  std::vector<ReformProbability> results;
  for (auto e : {Experiment::Exp1, Experiment::Exp2}) {
    bool all_present = true;
    for (const auto& p : results_files(c, e)) all_present = all_present && fs::is_regular_file(p);
    if (!all_present) continue;
    auto rs = load_results(c, e);
    results.insert(results.end(), rs.begin(), rs.end());
  }
  const auto cond = emit_condition_means(results);
  emit(fmt::format("condition_means_{}.csv", domain), cond.csv);
  const auto svg_path = paths.report_dir / fmt::format("condition_means_{}.svg", domain);
  if (cond.svg)
    emit(fmt::format("condition_means_{}.svg", domain), *cond.svg);
  else if (fs::exists(svg_path))
    fs::remove(svg_path);

  for (const auto& p : written) log << fmt::format("wrote {}\n", p.string());
  return written;
}

// ---------------------------------------------------------------------------

int run_command(std::string_view command, const fs::path& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err) {
  try {
    RunConfig config = load_config(config_path);
    apply_overrides(config, overrides);
    validate_config(config);
    if (command == "generate")
      cmd_generate(config, out);
    else if (command == "score")
      cmd_score(config, overrides.strict, out);
    else if (command == "analyze")
      cmd_analyze(config, out);
    else if (command == "report")
      cmd_report(config, out);
    else
      throw ConfigError(fmt::format("unknown command '{}'", command));
    return exit_code::kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return exit_code::kConfig;
  } catch (const CredentialError& e) {
    err << "credential error: " << e.what() << "\n";
    return exit_code::kCredential;
  } catch (const MissingInputError& e) {
    err << "missing input: " << e.what() << "\n";
    return exit_code::kMissingInput;
  } catch (const ScoringError& e) {
    err << "scoring failed for " << e.item_id() << ": " << e.what() << "\n";
    return exit_code::kStrictScoring;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kFailure;
  }
}

}  // namespace ideolens
