#include "aipoll/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "aipoll/error.hpp"

namespace aipoll {
namespace {

std::size_t metric_index(Metric m) {
  return static_cast<std::size_t>(std::find(kMetrics.begin(), kMetrics.end(), m) - kMetrics.begin());
}

constexpr std::array<const char*, kBaseWidth> kBaseLabels{
    "Ideology: Very conservative", "Ideology: Conservative", "Ideology: Liberal",
    "Ideology: Very liberal",      "Race: Non-white",        "Gender: Woman",
    "Prompt: Chain of Thought",    "Prompt: Distribution Reminder", "Cardinality: 2",
    "Cardinality: 4"};

std::string starred(const Coefficient& c) { return fmt(c.mean) + (c.significant ? "*" : " "); }

}  // namespace

TextTable::TextTable(std::vector<std::string> header) : header_(std::move(header)) {}

void TextTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw Error(ErrorCode::Shape, "table row width does not match header");
  rows_.push_back(std::move(cells));
}

void TextTable::add_rule() { rows_.emplace_back(); }

std::size_t TextTable::rows() const noexcept {
  return static_cast<std::size_t>(std::count_if(rows_.begin(), rows_.end(), [](const auto& r) { return !r.empty(); }));
}

std::string TextTable::to_text() const {
  std::vector<std::size_t> width(header_.size());
  for (std::size_t c = 0; c < header_.size(); ++c) width[c] = header_[c].size();
  for (const auto& r : rows_) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::size_t total = 0;
  for (auto w : width) total += w;
  total += 2 * (width.empty() ? 0 : width.size() - 1);

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& r) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c) line += "  ";
      const std::string pad(width[c] - r[c].size(), ' ');
      line += c == 0 ? r[c] + pad : pad + r[c];
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  };
  emit(header_);
  out << std::string(total, '-') << '\n';
  for (const auto& r : rows_) {
    if (r.empty()) {
      out << std::string(total, '-') << '\n';
    } else {
      emit(r);
    }
  }
  return out.str();
}

std::string TextTable::to_csv() const {
  std::ostringstream out;
  out << join_csv(header_) << '\n';
  for (const auto& r : rows_) {
    if (r.empty()) continue;
    std::vector<std::string> trimmed;
    for (auto cell : r) {
      while (!cell.empty() && (cell.back() == ' ' || cell.back() == '*')) cell.pop_back();
      trimmed.push_back(std::move(cell));
    }
    out << join_csv(trimmed) << '\n';
  }
  return out.str();
}

std::string fmt(double v, int decimals) { return std::isfinite(v) ? format_fixed(v, decimals) : "n/a"; }

std::string fmt(const std::optional<double>& v, int decimals) { return v ? fmt(*v, decimals) : "n/a"; }

std::string variant_label(const PromptVariant& v) {
  if (v.framework() == Framework::SI) return "SI";
  std::string s = "DD";
  if (v.cot_reminder()) s += "+cot";
  if (v.dist_reminder()) s += "+dist";
  return s;
}

nlohmann::json ComparisonReport::to_json() const {
  nlohmann::json paired_json = nlohmann::json::array();
  for (const auto& p : paired) paired_json.push_back(p.to_json());
  nlohmann::json variants_json = nlohmann::json::array();
  for (const auto& v : variants) {
    nlohmann::json m = nlohmann::json::object();
    for (const auto& s : v.metrics) {
      m[std::string(to_string(s.metric))] = {{"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"se", s.se}};
    }
    variants_json.push_back({{"variant", variant_label(v.variant)}, {"metrics", m}});
  }
  return {{"n_si", n_si},
          {"n_dd", n_dd},
          {"n_unpaired", n_unpaired},
          {"dd_variant", variant_label(comparison_dd_variant())},
          {"paired", paired_json},
          {"variants", variants_json}};
}

std::string ComparisonReport::to_text() const {
  std::ostringstream out;
  out << "SI vs " << variant_label(comparison_dd_variant()) << " on matched (question, cell) pairs\n";
  out << "pairs: " << (paired.empty() ? 0 : paired.front().n_pairs) << "  unpaired cells: " << n_unpaired << "\n";
  out << "difference = SI - DD; DD wins on lower NEMD/MD and lower |SDD|\n\n";
  if (paired.empty()) {
    out << "no SI/DD pairs available\n";
  } else {
    TextTable t({"Metric", "Pairs", "DD win %", "Mean diff", "SE", "CI lo (2se)", "CI hi (2se)"});
    for (const auto& p : paired) {
      t.add_row({std::string(to_string(p.metric)), std::to_string(p.n_pairs), fmt(100.0 * p.win_fraction, 1),
                 fmt(p.mean_diff, 4), fmt(p.se, 4), fmt(p.ci_lo, 4), fmt(p.ci_hi, 4)});
    }
    out << t.to_text();
  }
  out << "\nPer-variant means\n\n";
  TextTable v({"Variant", "N", "NEMD", "MD", "SDD", "SDD SE"});
  for (const auto& s : variants) {
    v.add_row({variant_label(s.variant), std::to_string(s.metrics[0].n), fmt(s.metrics[0].mean), fmt(s.metrics[1].mean),
               fmt(s.metrics[2].mean), fmt(s.metrics[2].se, 4)});
  }
  out << v.to_text();
  return out.str();
}

ComparisonReport build_comparison(std::span<const ComparisonRow> rows) {
  ComparisonReport r;
  const auto si = select_variant(rows, PromptVariant::single_individual());
  const auto dd = select_variant(rows, comparison_dd_variant());
  r.n_si = si.size();
  r.n_dd = dd.size();

  using Cell = std::pair<std::string, std::size_t>;
  std::set<Cell> si_cells, dd_cells;
  for (const auto& x : si) si_cells.insert({x.key.question_id, x.key.cell.index()});
  for (const auto& x : dd) dd_cells.insert({x.key.question_id, x.key.cell.index()});
  std::vector<ComparisonRow> si_paired, dd_paired;
  for (const auto& x : si) {
    if (dd_cells.contains({x.key.question_id, x.key.cell.index()})) si_paired.push_back(x);
  }
  for (const auto& x : dd) {
    if (si_cells.contains({x.key.question_id, x.key.cell.index()})) dd_paired.push_back(x);
  }
  r.n_unpaired = (si.size() - si_paired.size()) + (dd.size() - dd_paired.size());
  if (!si_paired.empty()) {
    for (auto m : kMetrics) r.paired.push_back(paired_compare(si_paired, dd_paired, m));
  }

  std::vector<PromptVariant> order{PromptVariant::single_individual()};
  order.insert(order.end(), all_dd_variants().begin(), all_dd_variants().end());
  for (const auto& v : order) {
    const auto sel = select_variant(rows, v);
    if (sel.empty()) continue;
    VariantSummary s;
    s.variant = v;
    for (std::size_t m = 0; m < kMetrics.size(); ++m) s.metrics[m] = summarize(sel, kMetrics[m]);
    r.variants.push_back(s);
  }
  return r;
}

TextTable coefficient_table_text(const CoefficientTable& t) {
  TextTable out({"Feature", "NEMD", "MD", "SDD"});
  for (std::size_t j = 0; j < kBaseWidth; ++j) {
    std::vector<std::string> row{kBaseLabels[j]};
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
      row.push_back(t.coefficients[m].empty() ? "n/a" : starred(t.coefficients[m][j]));
    }
    out.add_row(std::move(row));
  }
  out.add_rule();
  auto stat_row = [&](const char* label, auto get) {
    std::vector<std::string> row{label};
    for (std::size_t m = 0; m < kMetrics.size(); ++m) row.push_back(get(m) + " ");
    out.add_row(std::move(row));
  };
  stat_row("Metric Mean", [&](std::size_t m) { return fmt(t.stats[m].mean); });
  stat_row("Metric Standard Deviation", [&](std::size_t m) { return fmt(t.stats[m].sd); });
  stat_row("Metric Minimum", [&](std::size_t m) { return fmt(t.stats[m].min); });
  stat_row("Metric Maximum", [&](std::size_t m) { return fmt(t.stats[m].max); });
  stat_row("Bayesian Ridge Model R^2", [&](std::size_t m) { return fmt(t.r2[m]); });
  return out;
}

TextTable embedding_coefficients_text(const CoefficientTable& t) {
  TextTable out({"Metric", "Feature", "Coefficient", "Posterior SD"});
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    for (std::size_t j = kBaseWidth; j < t.coefficients[m].size(); ++j) {
      const auto& c = t.coefficients[m][j];
      if (!c.significant) continue;
      out.add_row({std::string(to_string(kMetrics[m])), c.name, fmt(c.mean, 4), fmt(c.sd, 4)});
    }
  }
  return out;
}

TextTable study_table_text(const StudyReport& r, StudyFramework f) {
  TextTable out({"Regression Model", "NEMD Training", "NEMD Testing", "MD Training", "MD Testing", "SDD Training",
                 "SDD Testing"});
  for (auto kind : kModelKinds) {
    std::vector<std::string> row{std::string(display_name(kind))};
    for (auto m : kMetrics) {
      const auto& cell = r.at(f, kind, m);
      row.push_back(fmt(cell.train_r2));
      row.push_back(fmt(cell.test_r2));
    }
    out.add_row(std::move(row));
  }
  return out;
}

std::vector<std::size_t> significant_embedding_dims(const CoefficientTable& t, Metric metric, std::size_t max_dims) {
  const auto& coefs = t.coefficients[metric_index(metric)];
  std::vector<std::size_t> dims;
  for (std::size_t j = kBaseWidth; j < coefs.size(); ++j) {
    if (coefs[j].significant) dims.push_back(j - kBaseWidth);
  }
  std::stable_sort(dims.begin(), dims.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(coefs[a + kBaseWidth].mean) > std::abs(coefs[b + kBaseWidth].mean);
  });
  if (dims.size() > max_dims) dims.resize(max_dims);
  return dims;
}

TextTable tag_table_text(const TagCorrelations& tc, std::span<const std::size_t> dims) {
  std::vector<std::string> header{"Tag"};
  for (auto d : dims) header.push_back(embedding_column(d));
  TextTable out(std::move(header));
  for (std::size_t k = 0; k < tc.tags.size(); ++k) {
    std::vector<std::string> row{tc.tags[k]};
    for (auto d : dims) {
      const auto& r = tc.r[k][d];
      row.push_back(r ? fmt(*r, 2) + (std::abs(*r) > 0.25 ? "*" : " ") : "n/a ");
    }
    out.add_row(std::move(row));
  }
  return out;
}

TextTable band_table_text(std::span<const BandPoint> band) {
  TextTable out({"x", "n", "mean", "se", "lo_2se", "hi_2se"});
  for (const auto& b : band) {
    out.add_row({fmt(b.x, 4), std::to_string(b.n), fmt(b.mean, 4), fmt(b.se, 4), fmt(b.lo, 4), fmt(b.hi, 4)});
  }
  return out;
}

}  // namespace aipoll
