#pragma once

// Reference Exp 2 coefficient columns (role nouns) and Exp 1 pre-test cells,
// used as rendering fixtures. Shaded cells get a tiny p, unshaded ones p = 0.3;
// estimates carry a small offset so rounding to 2 decimals is exercised.

#include <cmath>
#include <string>
#include <vector>

#include "ideolens/report.hpp"

namespace fixtures {

struct Cell {
  double value;
  bool shaded;
};

inline double nudge(double v) { return v + (std::signbit(v) ? -0.0012 : 0.0012); }

inline ideolens::ModelFit coefficient_column(const std::string& model,
                                             const std::vector<Cell>& cells) {
  static const std::vector<std::string> rows{"(Intercept)", "indirect", "refer",   "best",
                                             "choices",     "ind_dec",  "ideo_dec"};
  ideolens::ModelFit f;
  f.model = model;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    ideolens::Coefficient c;
    c.predictor = rows[i];
    c.estimate = nudge(cells[i].value);
    c.std_error = 0.01;
    c.z = c.estimate / c.std_error;
    c.p_value = cells[i].shaded ? 1e-8 : 0.3;
    f.fit.coefficients.push_back(c);
  }
  f.fit.converged = true;
  return f;
}

/// cur-1, dav-2 and ft5-xl role-noun columns.
inline std::vector<ideolens::ModelFit> role_noun_columns() {
  return {coefficient_column("cur-1", {{-0.78, false},
                                       {-1.12, true},
                                       {0.22, true},
                                       {0.22, true},
                                       {0.13, true},
                                       {0.91, true},
                                       {0.65, true}}),
          coefficient_column("dav-2", {{-1.03, true},
                                       {-0.05, false},
                                       {0.18, true},
                                       {0.22, true},
                                       {1.36, true},
                                       {1.84, true},
                                       {2.24, true}}),
          coefficient_column("ft5-xl", {{-0.73, true},
                                        {-0.03, false},
                                        {0.17, true},
                                        {0.03, false},
                                        {0.19, true},
                                        {0.24, true},
                                        {-0.02, false}})};
}

inline const char* role_noun_columns_markdown() {
  return "|  | cur-1 | dav-2 | ft5-xl |\n"
         "|---|---:|---:|---:|\n"
         "| `(Intercept)` | -0.78 | <span style=\"background-color:#dbd9d9\">-1.03</span> | "
         "<span style=\"background-color:#dbd9d9\">-0.73</span> |\n"
         "| `indirect` | <span style=\"background-color:#fac0dc\">-1.12</span> | -0.05 | -0.03 |\n"
         "| `refer` | <span style=\"background-color:#bdffea\">0.22</span> | "
         "<span style=\"background-color:#bdffea\">0.18</span> | "
         "<span style=\"background-color:#bdffea\">0.17</span> |\n"
         "| `best` | <span style=\"background-color:#bdffea\">0.22</span> | "
         "<span style=\"background-color:#bdffea\">0.22</span> | 0.03 |\n"
         "| `choices` | <span style=\"background-color:#bdffea\">0.13</span> | "
         "<span style=\"background-color:#bdffea\">1.36</span> | "
         "<span style=\"background-color:#bdffea\">0.19</span> |\n"
         "| `ind_dec` | <span style=\"background-color:#bdffea\">0.91</span> | "
         "<span style=\"background-color:#bdffea\">1.84</span> | "
         "<span style=\"background-color:#bdffea\">0.24</span> |\n"
         "| `ideo_dec` | <span style=\"background-color:#bdffea\">0.65</span> | "
         "<span style=\"background-color:#bdffea\">2.24</span> | -0.02 |\n";
}

inline ideolens::PretestEntry pretest(const std::string& model, ideolens::Domain domain,
                                      Cell groups, Cell stances) {
  ideolens::PretestEntry e;
  e.model = model;
  e.domain = domain;
  e.result.groups_mean_difference = nudge(groups.value);
  e.result.groups_adjusted_p = groups.shaded ? 1e-6 : 1.0;
  e.result.stances_mean_difference = nudge(stances.value);
  e.result.stances_adjusted_p = stances.shaded ? 1e-6 : 1.0;
  e.result.pass = groups.shaded && stances.shaded;
  return e;
}

/// cur-1 and ft5-s pre-test cells for both domains.
inline std::vector<ideolens::PretestEntry> pretest_cells() {
  using ideolens::Domain;
  return {pretest("cur-1", Domain::RoleNoun, {0.08, true}, {0.06, true}),
          pretest("ft5-s", Domain::RoleNoun, {0.01, true}, {0.01, true}),
          pretest("cur-1", Domain::Pronoun, {0.05, true}, {0.05, true}),
          pretest("ft5-s", Domain::Pronoun, {-0.00, false}, {-0.03, false})};
}

inline const char* pretest_cells_markdown() {
  return "|  |  | cur-1 | ft5-s |\n"
         "|---|---|---:|---:|\n"
         "| role nouns | `prog` > `cons`? | <span style=\"background-color:#bdffea\">0.08</span> | "
         "<span style=\"background-color:#bdffea\">0.01</span> |\n"
         "|  | `prog-stance` > `cons-stance`? | "
         "<span style=\"background-color:#bdffea\">0.06</span> | "
         "<span style=\"background-color:#bdffea\">0.01</span> |\n"
         "| singular pronouns | `prog` > `cons`? | "
         "<span style=\"background-color:#bdffea\">0.05</span> | -0.00 |\n"
         "|  | `prog-stance` > `cons-stance`? | "
         "<span style=\"background-color:#bdffea\">0.05</span> | -0.03 |\n";
}

}  // namespace fixtures
