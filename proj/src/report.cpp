#include "ideolens/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <tuple>

#include "ideolens/csv.hpp"
#include "ideolens/error.hpp"

namespace ideolens {

std::string_view to_string(Significance s) {
  switch (s) {
    case Significance::Positive: return "positive";
    case Significance::Negative: return "negative";
    case Significance::Baseline: return "baseline";
    case Significance::NotSignificant: return "not-significant";
  }
  return "not-significant";
}

std::optional<std::string_view> cell_color(Significance s) {
  switch (s) {
    case Significance::Positive: return "#bdffea";
    case Significance::Negative: return "#fac0dc";
    case Significance::Baseline: return "#dbd9d9";
    case Significance::NotSignificant: return std::nullopt;
  }
  return std::nullopt;
}

CellStyle style_cell(double value, double adjusted_p, double alpha, bool intercept) {
  CellStyle c{value, Significance::NotSignificant};
  if (!(adjusted_p < alpha)) return c;
  if (intercept)
    c.significance = Significance::Baseline;
  else if (value > 0.0)
    c.significance = Significance::Positive;
  else if (value < 0.0)
    c.significance = Significance::Negative;
  return c;
}

std::string format_value(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  return fmt::format("{:.6g}", v);
}

namespace {

std::string markdown_cell(const CellStyle& c) {
  const auto text = fmt::format("{:.2f}", c.value);
  if (auto color = cell_color(c.significance))
    return fmt::format("<span style=\"background-color:{}\">{}</span>", *color, text);
  return text;
}

std::string markdown_predictor(std::string_view name) { return fmt::format("`{}`", name); }

std::string svg_escape(std::string_view s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Unestimable p (a singular Hessian) stays NaN and never shades a cell.
double adjusted(double p, int m) { return std::isnan(p) ? p : bonferroni_adjust(p, m); }

std::string px(double v) { return fmt::format("{:.2f}", v); }

}  // namespace

// ---------------------------------------------------------------------------

CoefficientTable emit_coefficient_table(const std::vector<ModelFit>& fits, double alpha, int m) {
  if (fits.empty()) throw StatsError("coefficient table needs at least one fit");
  CoefficientTable table;
  for (const auto& c : fits.front().fit.coefficients) table.predictors.push_back(c.predictor);
  for (const auto& f : fits) {
    std::vector<std::string> names;
    for (const auto& c : f.fit.coefficients) names.push_back(c.predictor);
    if (names != table.predictors)
      throw StatsError(fmt::format("model '{}' has a different predictor set", f.model));
    table.models.push_back(f.model);
  }

  table.cells.assign(table.predictors.size(), {});
  for (std::size_t r = 0; r < table.predictors.size(); ++r) {
    const bool intercept = table.predictors[r] == "(Intercept)";
    for (const auto& f : fits) {
      const auto& c = f.fit.coefficients[r];
      table.cells[r].push_back(
          style_cell(c.estimate, adjusted(c.p_value, m), alpha, intercept));
    }
  }

  std::string& md = table.markdown;
  md += "|  |";
  for (const auto& model : table.models) md += fmt::format(" {} |", model);
  md += "\n|---|";
  for (std::size_t i = 0; i < table.models.size(); ++i) md += "---:|";
  md += "\n";
  for (std::size_t r = 0; r < table.predictors.size(); ++r) {
    md += fmt::format("| {} |", markdown_predictor(table.predictors[r]));
    for (const auto& cell : table.cells[r]) md += fmt::format(" {} |", markdown_cell(cell));
    md += "\n";
  }

  table.csv = "model,predictor,coefficient,std_error,p,p_adjusted,style\n";
  for (std::size_t i = 0; i < fits.size(); ++i) {
    for (std::size_t r = 0; r < table.predictors.size(); ++r) {
      const auto& c = fits[i].fit.coefficients[r];
      table.csv += csv::join({fits[i].model, c.predictor, format_value(c.estimate),
                              format_value(c.std_error), format_value(c.p_value),
                              format_value(adjusted(c.p_value, m)),
                              std::string(to_string(table.cells[r][i].significance))}) +
                   "\n";
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

PretestTable emit_pretest_table(const std::vector<PretestEntry>& entries, double alpha) {
  std::vector<std::string> models;
  std::vector<Domain> domains;
  std::map<std::pair<std::string, Domain>, const PretestResult*> index;
  for (const auto& e : entries) {
    if (std::find(models.begin(), models.end(), e.model) == models.end())
      models.push_back(e.model);
    if (std::find(domains.begin(), domains.end(), e.domain) == domains.end())
      domains.push_back(e.domain);
    index[{e.model, e.domain}] = &e.result;
  }
  std::sort(domains.begin(), domains.end());

  auto style = [&](double diff, double adjusted_p, bool degenerate) {
    CellStyle c{diff, Significance::NotSignificant};
    if (!degenerate && adjusted_p < alpha && diff > 0.0) c.significance = Significance::Positive;
    return c;
  };

  PretestTable out;
  out.markdown = "|  |  |";
  for (const auto& m : models) out.markdown += fmt::format(" {} |", m);
  out.markdown += "\n|---|---|";
  for (std::size_t i = 0; i < models.size(); ++i) out.markdown += "---:|";
  out.markdown += "\n";
  out.csv = "model,domain,test,mean_difference,p_adjusted,style\n";

  for (Domain d : domains) {
    const std::string_view label = d == Domain::RoleNoun ? "role nouns" : "singular pronouns";
    for (int row = 0; row < 2; ++row) {
      out.markdown += row == 0 ? fmt::format("| {} | `prog` > `cons`? |", label)
                               : std::string("|  | `prog-stance` > `cons-stance`? |");
      for (const auto& m : models) {
        auto it = index.find({m, d});
        if (it == index.end()) {
          out.markdown += "  |";
          continue;
        }
        const auto& r = *it->second;
        const CellStyle c =
            row == 0 ? style(r.groups_mean_difference, r.groups_adjusted_p, r.groups_degenerate)
                     : style(r.stances_mean_difference, r.stances_adjusted_p, r.stances_degenerate);
        out.markdown += fmt::format(" {} |", markdown_cell(c));
      }
      out.markdown += "\n";
    }
  }
  for (const auto& e : entries) {
    const auto& r = e.result;
    for (int row = 0; row < 2; ++row) {
      const double diff = row == 0 ? r.groups_mean_difference : r.stances_mean_difference;
      const double p = row == 0 ? r.groups_adjusted_p : r.stances_adjusted_p;
      const bool degenerate = row == 0 ? r.groups_degenerate : r.stances_degenerate;
      out.csv += csv::join({e.model, std::string(to_string(e.domain)),
                            row == 0 ? "prog>cons" : "prog-stance>cons-stance",
                            format_value(diff), format_value(p),
                            std::string(to_string(style(diff, p, degenerate).significance))}) +
                 "\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Exp1SummaryRow summary_row(const std::string& model, const GroupMeans& means) {
  Exp1SummaryRow row;
  row.model = model;
  row.meta = means.aggregate(PreambleGroup::PositiveMetaling);
  row.prog = means.aggregate(PreambleGroup::Prog);
  row.cons = means.aggregate(PreambleGroup::Cons);
  row.prog_stance = means.aggregate(PreambleGroup::ProgStance);
  row.cons_stance = means.aggregate(PreambleGroup::ConsStance);
  return row;
}

namespace {

constexpr std::string_view kMetaColor = "#4d4d4d";

struct Dot {
  std::string_view label;
  double value;
  std::string_view color;
};

}  // namespace

Exp1Summary emit_exp1_summary(const std::vector<Exp1SummaryRow>& rows) {
  Exp1Summary out;
  out.csv = "model,panel,group,mean_reform,bias_direction,p_adjusted\n";

  constexpr double kLabelWidth = 140.0;
  constexpr double kPanelWidth = 300.0;
  constexpr double kPanelGap = 40.0;
  constexpr double kRowHeight = 36.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 40.0;
  const double width = kLabelWidth + 2 * kPanelWidth + kPanelGap + 20.0;
  const double height = kTop + kRowHeight * static_cast<double>(rows.size()) + kBottom;

  std::string& svg = out.svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"11\">\n",
      px(width), px(height), px(width), px(height));
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
                     px(width), px(height));

  const std::array<std::string_view, 2> panel_names{"groups", "stances"};
  for (int p = 0; p < 2; ++p) {
    const double x0 = kLabelWidth + p * (kPanelWidth + kPanelGap);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
                       px(x0 + kPanelWidth / 2), px(kTop - 22), panel_names[p]);
    const double axis_y = kTop + kRowHeight * static_cast<double>(rows.size()) + 4;
    svg += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#000000\" stroke-width=\"1\"/>\n",
        px(x0), px(axis_y), px(x0 + kPanelWidth), px(axis_y));
    for (int t = 0; t <= 4; ++t) {
      const double x = x0 + kPanelWidth * t / 4.0;
      svg += fmt::format(
          "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
          px(x), px(kTop - 10), px(x), px(axis_y));
      svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", px(x),
                         px(axis_y + 14), format_value(t / 4.0));
    }
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">P(reform)</text>\n",
                       px(x0 + kPanelWidth / 2), px(axis_y + 30));
  }

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double y = kTop + kRowHeight * (static_cast<double>(i) + 0.5);
    svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                       px(kLabelWidth - 10), px(y + 4),
                       svg_escape(r.excluded ? r.model + " (excluded)" : r.model));
    for (int p = 0; p < 2; ++p) {
      const double x0 = kLabelWidth + p * (kPanelWidth + kPanelGap);
      auto xpos = [&](double v) { return x0 + kPanelWidth * std::clamp(v, 0.0, 1.0); };
      const auto& verdict = p == 0 ? r.groups : r.stances;
      const std::array<Dot, 3> dots{
          Dot{"meta", r.meta, kMetaColor},
          Dot{p == 0 ? "prog" : "prog-stance", p == 0 ? r.prog : r.prog_stance,
              kProgressiveColor},
          Dot{p == 0 ? "cons" : "cons-stance", p == 0 ? r.cons : r.cons_stance,
              kConservativeColor}};

      std::string direction = "excluded";
      std::string p_adj;
      if (!r.excluded && verdict) {
        direction = std::string(to_string(verdict->direction));
        p_adj = format_value(verdict->adjusted_p);
        if (verdict->direction != BiasDirection::NoBias) {
          const bool prog = verdict->direction == BiasDirection::Progressive;
          const Dot& other = prog ? dots[1] : dots[2];
          svg += fmt::format(
              "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"3\"/>\n",
              px(xpos(dots[0].value)), px(y), px(xpos(other.value)), px(y),
              prog ? kProgressiveColor : kConservativeColor);
        }
      }
      for (const auto& d : dots) {
        const auto value = format_value(d.value);
        svg += fmt::format(
            "<circle cx=\"{}\" cy=\"{}\" r=\"5\" fill=\"{}\"><title>{} {}: {}</title></circle>\n",
            px(xpos(d.value)), px(y), d.color, svg_escape(r.model), d.label, value);
        out.csv += csv::join({r.model, std::string(panel_names[p]), std::string(d.label), value,
                              direction, p_adj}) +
                   "\n";
      }
    }
  }

  const double legend_y = height - 8;
  svg += fmt::format(
      "<text x=\"{}\" y=\"{}\"><tspan fill=\"{}\">● meta</tspan>  <tspan fill=\"{}\">● prog "
      "/ progressive bias</tspan>  <tspan fill=\"{}\">● cons / conservative bias</tspan></text>\n",
      px(kLabelWidth), px(legend_y), kMetaColor, kProgressiveColor, kConservativeColor);
  svg += "</svg>\n";
  return out;
}

// ---------------------------------------------------------------------------

namespace {

int way_rank(const std::string& label) {
  const auto all = WayOfAsking::all();
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].label() == label) return static_cast<int>(i);
  return static_cast<int>(all.size());
}

constexpr std::array<std::string_view, 9> kFamilyColors{
    "#1b9e77", "#7b3294", "#e66101", "#c2a5cf", "#fdb863",
    "#66a61e", "#e7298a", "#7570b3", "#999999"};

}  // namespace

ConditionMeans emit_condition_means(const std::vector<ReformProbability>& results) {
  using Key = std::tuple<std::string, int, int, int, int, std::string>;
  struct Acc {
    double sum = 0.0;
    std::size_t count = 0;
    ConditionMean meta;
  };
  std::map<Key, Acc> acc;
  for (const auto& r : results) {
    const bool exp2 = r.experiment == Experiment::Exp2;
    std::string condition = exp2 && r.way_of_asking ? r.way_of_asking->label() : r.preamble_id;
    const int rank = exp2 ? way_rank(condition) : 0;
    Key key{r.model, static_cast<int>(r.experiment), static_cast<int>(r.domain),
            static_cast<int>(r.preamble_group), rank, condition};
    auto& a = acc[key];
    a.sum += r.p_reform;
    ++a.count;
    a.meta = {r.model, r.experiment, r.domain, std::string(to_string(r.preamble_group)),
              condition, 0.0, 0};
  }

  ConditionMeans out;
  out.csv = "model,experiment,domain,family,condition,mean_p_reform,count\n";
  for (auto& [key, a] : acc) {
    ConditionMean m = a.meta;
    m.mean_p_reform = a.sum / static_cast<double>(a.count);
    m.count = a.count;
    out.csv += csv::join({m.model, fmt::format("{}", static_cast<int>(m.experiment)),
                          std::string(to_string(m.domain)), m.family, m.condition,
                          format_value(m.mean_p_reform), fmt::format("{}", m.count)}) +
               "\n";
    out.rows.push_back(std::move(m));
  }
  if (out.rows.empty()) return out;

  // One chart per (model, experiment, domain), stacked vertically.
  std::vector<std::pair<std::size_t, std::size_t>> charts;  // [begin, end)
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    const auto& m = out.rows[i];
    if (charts.empty() || [&] {
          const auto& f = out.rows[charts.back().first];
          return f.model != m.model || f.experiment != m.experiment || f.domain != m.domain;
        }())
      charts.push_back({i, i});
    charts.back().second = i + 1;
  }

  constexpr double kBar = 16.0, kBarGap = 4.0, kFamilyGap = 18.0;
  constexpr double kLeft = 50.0, kPlotH = 180.0, kTitleH = 30.0, kLabelH = 110.0;
  double width = 0.0;
  for (auto [b, e] : charts) {
    std::set<std::string> families;
    for (auto i = b; i < e; ++i) families.insert(out.rows[i].family);
    width = std::max(width, kLeft + (e - b) * (kBar + kBarGap) +
                                families.size() * kFamilyGap + 20.0);
  }
  const double chart_h = kTitleH + kPlotH + kLabelH;
  const double height = chart_h * static_cast<double>(charts.size());

  std::string& svg = out.svg.emplace();
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "viewBox=\"0 0 {} {}\" font-family=\"sans-serif\" font-size=\"10\">\n",
      px(width), px(height), px(width), px(height));
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
                     px(width), px(height));

  for (std::size_t c = 0; c < charts.size(); ++c) {
    const auto [b, e] = charts[c];
    const double top = chart_h * static_cast<double>(c);
    const double base = top + kTitleH + kPlotH;
    const auto& first = out.rows[b];
    svg += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\">{} exp{} {}</text>\n", px(kLeft),
                       px(top + 18), svg_escape(first.model), static_cast<int>(first.experiment),
                       to_string(first.domain));
    for (int t = 0; t <= 4; ++t) {
      const double y = base - kPlotH * t / 4.0;
      svg += fmt::format(
          "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n",
          px(kLeft), px(y), px(width - 10), px(y));
      svg += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", px(kLeft - 4),
                         px(y + 3), format_value(t / 4.0));
    }
    double x = kLeft + kFamilyGap / 2;
    std::string family;
    int family_index = -1;
    for (auto i = b; i < e; ++i) {
      const auto& m = out.rows[i];
      if (m.family != family) {
        if (family_index >= 0) x += kFamilyGap;
        family = m.family;
        ++family_index;
      }
      const auto color = kFamilyColors[static_cast<std::size_t>(family_index) % kFamilyColors.size()];
      const double h = kPlotH * std::clamp(m.mean_p_reform, 0.0, 1.0);
      const auto value = format_value(m.mean_p_reform);
      svg += fmt::format(
          "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{} / {}: {} "
          "(n={})</title></rect>\n",
          px(x), px(base - h), px(kBar), px(h), color, svg_escape(m.family),
          svg_escape(m.condition), value, m.count);
      svg += fmt::format(
          "<text x=\"{}\" y=\"{}\" transform=\"rotate(60 {} {})\">{} / {}</text>\n",
          px(x + kBar / 2), px(base + 8), px(x + kBar / 2), px(base + 8), svg_escape(m.family),
          svg_escape(m.condition));
      x += kBar + kBarGap;
    }
  }
  svg += "</svg>\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

}  // namespace ideolens
