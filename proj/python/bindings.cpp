#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "ideolens/backend.hpp"
#include "ideolens/beta_regression.hpp"
#include "ideolens/error.hpp"
#include "ideolens/pipeline.hpp"
#include "ideolens/prompts.hpp"
#include "ideolens/report.hpp"
#include "ideolens/scorer.hpp"
#include "ideolens/stats.hpp"
#include "ideolens/stimuli.hpp"

namespace py = pybind11;
using namespace ideolens;

namespace {

std::vector<std::string> violations(const VariantSet& set) {
  std::vector<std::string> out;
  for (auto c : validate_variant_set(set).violations) out.emplace_back(to_string(c));
  return out;
}

py::dict result_dict(const ReformProbability& r) {
  return py::module_::import("json").attr("loads")(result_to_json(r).dump());
}

std::vector<WayOfAsking> all_ways() {
  const auto w = WayOfAsking::all();
  return {w.begin(), w.end()};
}

/// Item counts for one domain from stimulus CSVs.
py::dict suite_counts(const std::filesystem::path& data_dir, const std::string& domain_name) {
  const auto domain = parse_domain(domain_name);
  const auto names = load_names(data_dir / "names.csv");
  const auto preambles = load_preambles(data_dir / "preambles.csv");
  std::vector<VariantSet> sets;
  std::vector<SentenceTemplate> templates;
  if (domain == Domain::RoleNoun) {
    sets = load_variant_sets(data_dir / "role_nouns.csv");
    templates = role_noun_templates(sets);
  } else {
    sets = load_pronoun_variants(data_dir / "pronoun_variants.csv");
    templates = load_pronoun_templates(data_dir / "pronoun_templates.csv");
  }
  const auto exp1 = enumerate_exp1_suite(templates, names, preambles, domain);
  const auto exp2 = enumerate_exp2_suite(templates, names, all_ways(), preambles, domain, sets);
  py::dict d;
  d["exp1_items"] = exp1.size();
  d["exp2_prompts"] = exp2.size();
  d["exp2_cells"] = count_logical_cells(exp2);
  return d;
}

/// Scores the full Exp1 suite of one domain on the mock backend.
py::list score_exp1_mock(const std::filesystem::path& data_dir, const std::string& domain_name,
                         std::uint64_t seed, int context_states, int concurrency) {
  const auto domain = parse_domain(domain_name);
  const auto names = load_names(data_dir / "names.csv");
  const auto preambles = load_preambles(data_dir / "preambles.csv");
  std::vector<VariantSet> sets;
  std::vector<SentenceTemplate> templates;
  if (domain == Domain::RoleNoun) {
    sets = load_variant_sets(data_dir / "role_nouns.csv");
    templates = role_noun_templates(sets);
  } else {
    sets = load_pronoun_variants(data_dir / "pronoun_variants.csv");
    templates = load_pronoun_templates(data_dir / "pronoun_templates.csv");
  }
  MockBackend mock({seed, context_states, Architecture::Autoregressive});
  SuiteOptions opts;
  opts.concurrency_limit = concurrency;
  opts.model = "mock";
  SuiteOutcome outcome;
  {
    py::gil_scoped_release release;
    outcome = run_suite(enumerate_exp1_suite(templates, names, preambles, domain), sets, mock,
                        nullptr, opts);
  }
  if (!outcome.failures.empty())
    throw ScoringError(outcome.failures.front().item_id,
                       outcome.failures.front().item_id + ": " + outcome.failures.front().message);
  py::list out;
  for (const auto& r : outcome.results) out.append(result_dict(r));
  return out;
}

py::dict fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
             const std::vector<std::string>& predictors,
             const std::map<std::string, std::vector<std::string>>& factors, bool pin_variances) {
  MixedBetaData data{y, X, predictors, {}};
  for (const auto& [name, labels] : factors) data.factors.push_back(make_factor(name, labels));
  FitOptions opts;
  opts.pin_variances_to_zero = pin_variances;
  BetaRegressionFit f;
  {
    py::gil_scoped_release release;
    f = fit_beta_regression(data, opts);
  }
  return py::module_::import("json").attr("loads")(fit_to_json(f).dump());
}

py::dict t_test(const std::vector<std::pair<double, double>>& pairs, bool one_tailed) {
  const auto r = paired_t_test(pairs, one_tailed ? Tails::One : Tails::Two);
  py::dict d;
  d["t"] = r.t_statistic;
  d["df"] = r.degrees_of_freedom;
  d["p"] = r.p_value;
  d["mean_difference"] = r.mean_difference;
  return d;
}

py::dict bias(const std::vector<double>& delta_prog, const std::vector<double>& delta_cons,
              double alpha, int m) {
  const auto v = bias_test(delta_prog, delta_cons, alpha, m);
  py::dict d;
  d["direction"] = std::string(to_string(v.direction));
  d["adjusted_p"] = v.adjusted_p;
  d["t"] = v.test.t_statistic;
  d["degenerate"] = v.degenerate;
  d["mean_delta_prog"] = v.mean_delta_prog;
  d["mean_delta_cons"] = v.mean_delta_cons;
  return d;
}

py::tuple run(const std::string& command, const std::filesystem::path& config,
              std::optional<int> experiment, std::optional<std::string> domain,
              std::optional<std::uint64_t> seed, bool strict) {
  Overrides o;
  if (experiment) o.experiment = static_cast<Experiment>(*experiment);
  if (domain) o.domain = parse_domain(*domain);
  o.seed = seed;
  o.strict = strict;
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = run_command(command, config, o, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Language-ideology evaluation harness";

  py::register_exception<Error>(m, "IdeolensError");

  py::class_<VariantSet>(m, "VariantSet")
      .def(py::init<>())
      .def_readwrite("id", &VariantSet::id)
      .def_readwrite("reform_variants", &VariantSet::reform_variants)
      .def_readwrite("feminine_variant", &VariantSet::feminine_variant)
      .def_readwrite("masculine_variant", &VariantSet::masculine_variant)
      .def_readwrite("determiner", &VariantSet::determiner)
      .def_readwrite("variant_determiners", &VariantSet::variant_determiners)
      .def_readwrite("in_gpt_subset", &VariantSet::in_gpt_subset)
      .def("variants", &VariantSet::variants)
      .def("__repr__", [](const VariantSet& s) { return "<VariantSet " + s.id + ">"; });

  m.def("load_role_nouns", &load_variant_sets, py::arg("path"));
  m.def("load_pronoun_variants", &load_pronoun_variants, py::arg("path"));
  m.def("validate_variant_set", &violations, py::arg("set"),
        "Names of the violated criteria; empty when the set is valid.");
  m.def("suite_counts", &suite_counts, py::arg("data_dir"), py::arg("domain"));
  m.def("score_exp1_mock", &score_exp1_mock, py::arg("data_dir"), py::arg("domain"),
        py::arg("seed") = 42, py::arg("context_states") = 8, py::arg("concurrency") = 4);
  m.def("normalize_log_probs",
        [](const std::vector<double>& lp) { return normalize_log_probs(lp); }, py::arg("log_probs"));
  m.def("paired_t_test", &t_test, py::arg("pairs"), py::arg("one_tailed") = false);
  m.def("bonferroni_adjust", &bonferroni_adjust, py::arg("p"), py::arg("m"));
  m.def("bias_test", &bias, py::arg("delta_prog"), py::arg("delta_cons"), py::arg("alpha") = 0.05,
        py::arg("m") = 1);
  m.def("fit_beta_regression", &fit, py::arg("y"), py::arg("X"), py::arg("predictors"),
        py::arg("factors") = std::map<std::string, std::vector<std::string>>{},
        py::arg("pin_variances") = false);
  m.def("run_command", &run, py::arg("command"), py::arg("config"),
        py::arg("experiment") = std::nullopt, py::arg("domain") = std::nullopt,
        py::arg("seed") = std::nullopt, py::arg("strict") = false,
        "Runs one CLI command; returns (exit_status, stdout, stderr).");
}
